#include "edcnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "edcnn/errors.hpp"

namespace edcnn {

namespace {

// Shapes of a pooled network, enough to interpret a flat parameter vector.
struct Shape {
    std::size_t d = 0;
    std::size_t s = 0;
    std::vector<std::size_t> pools;
    std::vector<std::size_t> in_widths;    // per layer, before the convolution
    std::vector<std::size_t> bias_widths;  // per layer, before pooling
    std::size_t out_width = 0;
    std::size_t size = 0;

    explicit Shape(const PooledEDCNN& net) : d(net.input_dim()), s(net.filter_length()) {
        std::size_t width = d;
        for (const auto& layer : net.layers()) {
            pools.push_back(layer.pool);
            in_widths.push_back(width);
            width += s;
            bias_widths.push_back(width);
            size += s + 1 + width;
            width /= layer.pool;
        }
        out_width = width;
        size += width;
    }
};

// Forward pass over all samples with the intermediate values the backward pass needs.
struct Trace {
    std::vector<Matrix> inputs;  // layer inputs, column per sample
    std::vector<Matrix> pre;     // pre-activations
    std::vector<Eigen::MatrixXi> argmax;
    Matrix features;
    Eigen::RowVectorXd outputs;
};

Trace forward(const Shape& shape, std::span<const double> p, const Matrix& X, bool keep) {
    Trace trace;
    Matrix V = X;
    const auto m = X.cols();
    std::size_t offset = 0;
    for (std::size_t l = 0; l < shape.pools.size(); ++l) {
        const double* w = p.data() + offset;
        const double* b = w + shape.s + 1;
        const auto n = static_cast<Eigen::Index>(shape.in_widths[l]);
        const auto width = static_cast<Eigen::Index>(shape.bias_widths[l]);
        offset += shape.s + 1 + shape.bias_widths[l];

        Matrix Z(width, m);
        for (Eigen::Index c = 0; c < m; ++c) {
            const double* v = V.col(c).data();
            double* z = Z.col(c).data();
            std::copy(b, b + width, z);
            for (std::size_t t = 0; t <= shape.s; ++t) {
                const double wt = w[t];
                if (wt == 0.0) continue;
                double* zt = z + t;
                for (Eigen::Index i = 0; i < n; ++i) zt[i] += wt * v[i];
            }
        }
        Matrix A = Z.cwiseMax(0.0);
        const auto u = static_cast<Eigen::Index>(shape.pools[l]);
        if (keep) trace.inputs.push_back(std::move(V));
        if (u == 1) {
            V = std::move(A);
            if (keep) trace.argmax.emplace_back();
        } else {
            const auto rows = width / u;
            Matrix P(rows, m);
            Eigen::MatrixXi idx(keep ? rows : 0, keep ? m : 0);
            for (Eigen::Index c = 0; c < m; ++c) {
                for (Eigen::Index k = 0; k < rows; ++k) {
                    Eigen::Index best = k * u;
                    for (Eigen::Index i = k * u + 1; i < (k + 1) * u; ++i) {
                        if (A(i, c) > A(best, c)) best = i;
                    }
                    P(k, c) = A(best, c);
                    if (keep) idx(k, c) = static_cast<int>(best);
                }
            }
            V = std::move(P);
            if (keep) trace.argmax.push_back(std::move(idx));
        }
        if (keep) trace.pre.push_back(std::move(Z));
    }
    const Eigen::Map<const Eigen::VectorXd> a(p.data() + offset, static_cast<Eigen::Index>(shape.out_width));
    trace.outputs = a.transpose() * V;
    trace.features = std::move(V);
    return trace;
}

double risk_of(const Eigen::RowVectorXd& outputs, const Dataset& data, bool clamp) {
    const double M = data.bound();
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double f = outputs(static_cast<Eigen::Index>(i));
        if (clamp) f = truncate(f, M);
        const double r = f - data.targets()[i];
        acc += r * r;
    }
    return acc / static_cast<double>(data.size());
}

double raw_risk(const Shape& shape, std::span<const double> p, const Dataset& data) {
    return risk_of(forward(shape, p, data.inputs(), false).outputs, data, false);
}

Vector raw_gradient(const Shape& shape, std::span<const double> p, const Dataset& data, double* risk) {
    const Trace trace = forward(shape, p, data.inputs(), true);
    const auto m = static_cast<Eigen::Index>(data.size());
    const double scale = 2.0 / static_cast<double>(m);
    Eigen::RowVectorXd r(m);
    for (Eigen::Index c = 0; c < m; ++c) r(c) = trace.outputs(c) - data.targets()[static_cast<std::size_t>(c)];
    if (risk != nullptr) *risk = r.squaredNorm() / static_cast<double>(m);

    Vector grad(shape.size, 0.0);
    std::size_t offset = shape.size - shape.out_width;
    const Eigen::VectorXd ga = scale * (trace.features * r.transpose());
    std::copy(ga.data(), ga.data() + ga.size(), grad.begin() + static_cast<std::ptrdiff_t>(offset));

    const Eigen::Map<const Eigen::VectorXd> a(p.data() + offset, static_cast<Eigen::Index>(shape.out_width));
    Matrix G = scale * (a * r);  // d risk / d features
    for (std::size_t l = shape.pools.size(); l-- > 0;) {
        const auto n = static_cast<Eigen::Index>(shape.in_widths[l]);
        const auto width = static_cast<Eigen::Index>(shape.bias_widths[l]);
        offset -= shape.s + 1 + shape.bias_widths[l];
        const Matrix& Z = trace.pre[l];
        const Matrix& V = trace.inputs[l];

        Matrix dZ;
        if (shape.pools[l] == 1) {
            dZ = std::move(G);
        } else {
            dZ = Matrix::Zero(width, m);
            const auto& idx = trace.argmax[l];
            for (Eigen::Index c = 0; c < m; ++c) {
                for (Eigen::Index k = 0; k < idx.rows(); ++k) dZ(idx(k, c), c) = G(k, c);
            }
        }
        dZ = (Z.array() > 0.0).select(dZ, 0.0);

        double* gw = grad.data() + offset;
        double* gb = gw + shape.s + 1;
        const Eigen::VectorXd bias_grad = dZ.rowwise().sum();
        std::copy(bias_grad.data(), bias_grad.data() + width, gb);
        const double* w = p.data() + offset;
        Matrix prev = Matrix::Zero(n, m);
        for (std::size_t t = 0; t <= shape.s; ++t) {
            const auto block = dZ.middleRows(static_cast<Eigen::Index>(t), n);
            gw[t] = block.cwiseProduct(V).sum();
            if (w[t] != 0.0) prev.noalias() += w[t] * block;
        }
        G = std::move(prev);
    }
    return grad;
}

// Per-sample derivatives of the network output: row i is d f(x_i) / d params. `residual`
// receives f(x_i) - y_i.
Matrix raw_jacobian(const Shape& shape, std::span<const double> p, const Dataset& data, Eigen::VectorXd& residual) {
    const Trace trace = forward(shape, p, data.inputs(), true);
    const auto m = static_cast<Eigen::Index>(data.size());
    residual = trace.outputs.transpose();
    for (Eigen::Index c = 0; c < m; ++c) residual(c) -= data.targets()[static_cast<std::size_t>(c)];

    Matrix J(m, static_cast<Eigen::Index>(shape.size));
    auto offset = static_cast<Eigen::Index>(shape.size - shape.out_width);
    const auto outs = static_cast<Eigen::Index>(shape.out_width);
    J.middleCols(offset, outs) = trace.features.transpose();

    const Eigen::Map<const Eigen::VectorXd> a(p.data() + offset, outs);
    Matrix G = a.replicate(1, m);
    for (std::size_t l = shape.pools.size(); l-- > 0;) {
        const auto n = static_cast<Eigen::Index>(shape.in_widths[l]);
        const auto width = static_cast<Eigen::Index>(shape.bias_widths[l]);
        offset -= static_cast<Eigen::Index>(shape.s + 1 + shape.bias_widths[l]);
        const Matrix& Z = trace.pre[l];
        const Matrix& V = trace.inputs[l];

        Matrix dZ;
        if (shape.pools[l] == 1) {
            dZ = std::move(G);
        } else {
            dZ = Matrix::Zero(width, m);
            const auto& idx = trace.argmax[l];
            for (Eigen::Index c = 0; c < m; ++c) {
                for (Eigen::Index k = 0; k < idx.rows(); ++k) dZ(idx(k, c), c) = G(k, c);
            }
        }
        dZ = (Z.array() > 0.0).select(dZ, 0.0);

        const auto taps = static_cast<Eigen::Index>(shape.s + 1);
        J.middleCols(offset + taps, width) = dZ.transpose();
        const double* w = p.data() + offset;
        Matrix prev = Matrix::Zero(n, m);
        for (Eigen::Index t = 0; t < taps; ++t) {
            const auto block = dZ.middleRows(t, n);
            J.col(offset + t) = block.cwiseProduct(V).colwise().sum().transpose();
            if (w[t] != 0.0) prev.noalias() += w[t] * block;
        }
        G = std::move(prev);
    }
    return J;
}

constexpr int kMaxInitialDraws = 100;
// Relative damping beyond which the Gauss-Newton search gives up.
constexpr double kMaxDamping = 1e12;

double squared_norm(const Vector& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc;
}

}  // namespace

Dataset::Dataset(Matrix inputs, Vector targets, double M)
    : inputs_(std::move(inputs)), targets_(std::move(targets)), M_(M) {
    if (!(M_ > 0.0)) throw InvalidArgument("Dataset: M must be positive");
    if (static_cast<std::size_t>(inputs_.cols()) != targets_.size()) {
        throw InvalidArgument("Dataset: " + std::to_string(inputs_.cols()) + " inputs but " +
                              std::to_string(targets_.size()) + " targets");
    }
    if (inputs_.rows() == 0) throw InvalidArgument("Dataset: inputs have dimension 0");
    for (Eigen::Index i = 0; i < inputs_.size(); ++i) {
        const double x = inputs_.data()[i];
        if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("Dataset: input outside the unit cube");
    }
    for (double y : targets_) {
        if (!(std::abs(y) <= M_)) throw InvalidArgument("Dataset: target exceeds the bound M");
    }
}

Vector Dataset::input(std::size_t i) const {
    const auto col = inputs_.col(static_cast<Eigen::Index>(i));
    return Vector(col.data(), col.data() + col.size());
}

Vector flatten_parameters(const PooledEDCNN& net) {
    Vector p;
    for (const auto& layer : net.layers()) {
        const auto c = layer.filter.coeffs();
        p.insert(p.end(), c.begin(), c.end());
        p.insert(p.end(), layer.bias.begin(), layer.bias.end());
    }
    p.insert(p.end(), net.output_weights().begin(), net.output_weights().end());
    return p;
}

PooledEDCNN with_parameters(const PooledEDCNN& net, std::span<const double> params) {
    const Shape shape(net);
    if (params.size() != shape.size) {
        throw DimensionError("with_parameters: expected " + std::to_string(shape.size) + " parameters, got " +
                             std::to_string(params.size()));
    }
    std::vector<ConvLayer> layers;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < shape.pools.size(); ++l) {
        const auto* w = params.data() + offset;
        const auto* b = w + shape.s + 1;
        layers.push_back({Filter(Vector(w, b)), Vector(b, b + shape.bias_widths[l]), shape.pools[l]});
        offset += shape.s + 1 + shape.bias_widths[l];
    }
    return PooledEDCNN(shape.d, shape.s, std::move(layers), Vector(params.begin() + static_cast<std::ptrdiff_t>(offset), params.end()));
}

double empirical_risk(const PooledEDCNN& net, const Dataset& data, bool clamp) {
    if (data.size() == 0) throw InvalidArgument("empirical_risk: empty dataset");
    if (data.dim() != net.input_dim()) throw DimensionError("empirical_risk: dataset dimension mismatch");
    const Shape shape(net);
    const Vector p = flatten_parameters(net);
    return risk_of(forward(shape, p, data.inputs(), false).outputs, data, clamp);
}

Vector grad_empirical_risk(const PooledEDCNN& net, const Dataset& data) {
    if (data.size() == 0) throw InvalidArgument("grad_empirical_risk: empty dataset");
    if (data.dim() != net.input_dim()) throw DimensionError("grad_empirical_risk: dataset dimension mismatch");
    return raw_gradient(Shape(net), flatten_parameters(net), data, nullptr);
}

double kink_margin(const PooledEDCNN& net, const Dataset& data) {
    const Shape shape(net);
    const Vector p = flatten_parameters(net);
    const Trace trace = forward(shape, p, data.inputs(), true);
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < trace.pre.size(); ++l) {
        const Matrix& Z = trace.pre[l];
        margin = std::min(margin, Z.cwiseAbs().minCoeff());
        const auto u = static_cast<Eigen::Index>(shape.pools[l]);
        if (u == 1) continue;
        for (Eigen::Index c = 0; c < Z.cols(); ++c) {
            for (Eigen::Index k = 0; k < Z.rows() / u; ++k) {
                double first = 0.0;
                double second = 0.0;
                for (Eigen::Index i = k * u; i < (k + 1) * u; ++i) {
                    const double a = std::max(Z(i, c), 0.0);
                    if (a > first) {
                        second = first;
                        first = a;
                    } else if (a > second) {
                        second = a;
                    }
                }
                if (first > 0.0) margin = std::min(margin, first - second);
            }
        }
    }
    return margin;
}

GradientCheck check_gradient(const PooledEDCNN& net, const Dataset& data, double step, double floor) {
    const Shape shape(net);
    Vector p = flatten_parameters(net);
    const Vector g = grad_empirical_risk(net, data);
    GradientCheck check;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + step;
        const double up = raw_risk(shape, p, data);
        p[i] = keep - step;
        const double down = raw_risk(shape, p, data);
        p[i] = keep;
        const double fd = (up - down) / (2.0 * step);
        const double rel = std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), floor});
        if (i == 0 || rel > check.max_relative_error) check = {rel, i, g[i], fd};
    }
    return check;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning_rate must be positive");
    if (epochs == 0) throw InvalidArgument("epochs must be at least 1");
    if (restarts == 0) throw InvalidArgument("restarts must be at least 1");
    if (!(M > 0.0)) throw InvalidArgument("M must be positive");
    if (!(growth >= 1.0)) throw InvalidArgument("growth must be at least 1");
    if (!(min_step > 0.0)) throw InvalidArgument("min_step must be positive");
    if (!(armijo > 0.0 && armijo < 1.0)) throw InvalidArgument("armijo must lie in (0, 1)");
    if (jobs == 0) throw InvalidArgument("jobs must be at least 1");
    if (!(damping > 0.0)) throw InvalidArgument("damping must be positive");
    if (!(init_scale > 0.0)) throw InvalidArgument("init_scale must be positive");
}

PooledEDCNN initial_network(std::size_t d, std::size_t s, std::size_t depth, std::mt19937_64& rng, double scale) {
    if (!(scale > 0.0)) throw InvalidArgument("initial_network: scale must be positive");
    const double fw = scale / std::sqrt(static_cast<double>(s + 1));
    std::uniform_real_distribution<double> filter_dist(-fw, fw);
    std::vector<Filter> filters;
    std::vector<Vector> biases;
    for (std::size_t width : standard_bias_widths(d, s, depth)) {
        Vector w(s + 1);
        for (double& x : w) x = filter_dist(rng);
        filters.emplace_back(std::move(w));
        biases.emplace_back(width, 0.0);
    }
    std::size_t width = d;
    for (std::size_t u : standard_pool_sizes(d, s, depth)) width = (width + s) / u;
    const double aw = 1.0 / std::sqrt(static_cast<double>(width));
    std::uniform_real_distribution<double> out_dist(-aw, aw);
    Vector a(width);
    for (double& x : a) x = out_dist(rng);
    return PooledEDCNN::scheduled(d, s, std::move(filters), std::move(biases), std::move(a));
}

RestartRecord gradient_descent(const Shape& shape, Vector& p, const Dataset& data, const TrainConfig& config) {
    RestartRecord record;
    double risk = 0.0;
    Vector g = raw_gradient(shape, p, data, &risk);
    if (!std::isfinite(risk)) {
        record.diverged = true;
        record.risk = std::numeric_limits<double>::quiet_NaN();
        return record;
    }
    double step = config.learning_rate;
    Vector candidate(p.size());
    for (; record.epochs < config.epochs; ++record.epochs) {
        const double gg = squared_norm(g);
        if (!std::isfinite(gg)) {
            record.diverged = true;
            break;
        }
        if (gg < config.tolerance) break;
        bool accepted = false;
        while (step >= config.min_step) {
            for (std::size_t i = 0; i < p.size(); ++i) candidate[i] = p[i] - step * g[i];
            const double trial = raw_risk(shape, candidate, data);
            if (std::isfinite(trial) && trial <= risk - config.armijo * step * gg) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            ++record.rejected_epochs;
            break;
        }
        p.swap(candidate);
        g = raw_gradient(shape, p, data, &risk);
        step *= config.growth;
    }
    record.risk = record.diverged ? std::numeric_limits<double>::quiet_NaN() : risk;
    return record;
}

// Levenberg-Marquardt: the direction solves (J^T J + mu I) delta = J^T r; mu shrinks after an
// accepted step and grows until the sufficient-decrease test passes.
RestartRecord gauss_newton(const Shape& shape, Vector& p, const Dataset& data, const TrainConfig& config) {
    RestartRecord record;
    const double m = static_cast<double>(data.size());
    Eigen::VectorXd r;
    Matrix J = raw_jacobian(shape, p, data, r);
    double risk = r.squaredNorm() / m;
    if (!std::isfinite(risk)) {
        record.diverged = true;
        record.risk = std::numeric_limits<double>::quiet_NaN();
        return record;
    }
    double mu = -1.0;
    Vector candidate(p.size());
    for (; record.epochs < config.epochs; ++record.epochs) {
        const Eigen::VectorXd Jr = J.transpose() * r;
        const double gg = (2.0 / m) * (2.0 / m) * Jr.squaredNorm();
        if (!std::isfinite(gg)) {
            record.diverged = true;
            break;
        }
        if (gg < config.tolerance) break;
        // (J^T J + mu I)^-1 J^T r = J^T (J J^T + mu I)^-1 r; factor whichever Gram matrix is smaller.
        const bool wide = J.rows() < J.cols();
        const Matrix A = wide ? Matrix(J * J.transpose()) : Matrix(J.transpose() * J);
        const double scale = std::max(A.diagonal().maxCoeff(), 1e-300);
        if (mu < 0.0) mu = config.damping * scale;
        bool accepted = false;
        while (mu <= kMaxDamping * scale) {
            Matrix H = A;
            H.diagonal().array() += mu;
            const Eigen::VectorXd delta = wide ? Eigen::VectorXd(J.transpose() * H.ldlt().solve(r))
                                               : Eigen::VectorXd(H.ldlt().solve(Jr));
            for (std::size_t i = 0; i < p.size(); ++i) candidate[i] = p[i] - delta(static_cast<Eigen::Index>(i));
            const double trial = raw_risk(shape, candidate, data);
            if (std::isfinite(trial) && trial <= risk - config.armijo * (2.0 / m) * Jr.dot(delta)) {
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if (!accepted) {
            ++record.rejected_epochs;
            break;
        }
        p.swap(candidate);
        J = raw_jacobian(shape, p, data, r);
        risk = r.squaredNorm() / m;
        mu /= 3.0;
    }
    record.risk = record.diverged ? std::numeric_limits<double>::quiet_NaN() : risk;
    return record;
}

RestartRecord descend(PooledEDCNN& net, const Dataset& data, const TrainConfig& config) {
    config.validate();
    if (data.size() == 0) throw InvalidArgument("descend: empty dataset");
    if (data.dim() != net.input_dim()) throw DimensionError("descend: dataset dimension mismatch");
    const Shape shape(net);
    Vector p = flatten_parameters(net);
    const RestartRecord record = config.optimizer == Optimizer::GaussNewton ? gauss_newton(shape, p, data, config)
                                                                            : gradient_descent(shape, p, data, config);
    if (!record.diverged) net = with_parameters(net, p);
    return record;
}

PooledEDCNN embed_network(const PooledEDCNN& net, std::size_t depth) {
    if (!net.follows_standard_schedule()) throw InvalidArgument("embed_network: network is off the standard schedule");
    if (depth < net.depth()) throw InvalidArgument("embed_network: target depth is smaller than the network's");
    const std::size_t s = net.filter_length();
    const auto pools = standard_pool_sizes(net.input_dim(), s, depth);
    std::vector<ConvLayer> layers = net.layers();
    std::size_t width = net.output_weights().size();
    for (std::size_t l = net.depth(); l < depth; ++l) {
        if (pools[l] != 1) {
            throw InvalidArgument("embed_network: layer " + std::to_string(l + 1) + " pools, embedding would not be exact");
        }
        width += s;
        layers.push_back({Filter::delta(s), Vector(width, 0.0), 1});
    }
    Vector output(width, 0.0);
    std::copy(net.output_weights().begin(), net.output_weights().end(), output.begin());
    return PooledEDCNN(net.input_dim(), s, std::move(layers), std::move(output));
}

TrainedModel erm_train(const Dataset& data, std::size_t depth, std::size_t s, const TrainConfig& config,
                       const PooledEDCNN* warm_start) {
    config.validate();
    if (data.size() == 0) throw InvalidArgument("erm_train: empty dataset");
    if (depth == 0) throw InvalidArgument("erm_train: depth must be positive");
    if (s < 2) throw InvalidArgument("erm_train: s must be at least 2");
    if (warm_start != nullptr && (warm_start->input_dim() != data.dim() || warm_start->filter_length() != s)) {
        throw InvalidArgument("erm_train: warm start has a different input dimension or filter length");
    }

    struct Outcome {
        PooledEDCNN net;
        RestartRecord record;
    };
    auto run = [&](std::size_t restart) {
        if (restart == config.restarts) {
            Outcome out{embed_network(*warm_start, depth), {}};
            out.record = descend(out.net, data, config);
            out.record.warm_start = true;
            return out;
        }
        std::seed_seq seq{config.seed, static_cast<std::uint64_t>(restart)};
        std::mt19937_64 rng(seq);
        // A network that is dead on every sample has zero gradient and can never move; redraw.
        Outcome out{initial_network(data.dim(), s, depth, rng, config.init_scale), {}};
        for (int attempt = 1; attempt < kMaxInitialDraws && out.net.features_batch(data.inputs()).isZero(0.0); ++attempt) {
            out.net = initial_network(data.dim(), s, depth, rng, config.init_scale);
        }
        out.record = descend(out.net, data, config);
        return out;
    };

    const std::size_t candidates = config.restarts + (warm_start != nullptr ? 1 : 0);
    std::vector<Outcome> outcomes;
    outcomes.reserve(candidates);
    if (config.jobs <= 1) {
        for (std::size_t r = 0; r < candidates; ++r) outcomes.push_back(run(r));
    } else {
        for (std::size_t first = 0; first < candidates; first += config.jobs) {
            std::vector<std::future<Outcome>> batch;
            for (std::size_t r = first; r < std::min(candidates, first + config.jobs); ++r) {
                batch.push_back(std::async(std::launch::async, run, r));
            }
            for (auto& f : batch) outcomes.push_back(f.get());
        }
    }

    std::size_t best = outcomes.size();
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
        if (outcomes[r].record.diverged) continue;
        if (best == outcomes.size() || outcomes[r].record.risk < outcomes[best].record.risk) best = r;
    }
    if (best == outcomes.size()) throw NumericalFailure("erm_train: every restart diverged");
    TrainedModel model{outcomes[best].net, outcomes[best].record.risk, best, {}};
    for (const auto& o : outcomes) model.restarts.push_back(o.record);
    return model;
}

Sampler uniform_sampler(std::size_t d) {
    return [d](std::mt19937_64& rng) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Vector x(d);
        for (double& t : x) t = unit(rng);
        return x;
    };
}

MonteCarloEstimate excess_risk(const PooledEDCNN& net, const TargetFn& target, std::size_t n_mc, double M,
                               std::uint64_t seed, const Sampler& sampler) {
    if (n_mc == 0) throw InvalidArgument("excess_risk: n_mc must be positive");
    const Sampler draw = sampler ? sampler : uniform_sampler(net.input_dim());
    const std::size_t d = net.input_dim();
    std::mt19937_64 rng(seed);
    constexpr std::size_t kChunk = 4096;
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < n_mc; start += kChunk) {
        const std::size_t len = std::min(kChunk, n_mc - start);
        Matrix X(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(len));
        Vector want(len);
        for (std::size_t i = 0; i < len; ++i) {
            const Vector x = draw(rng);
            if (x.size() != d) throw DimensionError("excess_risk: sampler returned the wrong dimension");
            X.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(d));
            want[i] = target(x);
        }
        const Eigen::VectorXd got = net.evaluate_batch(X);
        for (std::size_t i = 0; i < len; ++i) {
            const double e = truncate(got(static_cast<Eigen::Index>(i)), M) - want[i];
            const double sq = e * e;
            ++count;
            const double delta = sq - mean;
            mean += delta / static_cast<double>(count);
            m2 += delta * (sq - mean);
        }
    }
    MonteCarloEstimate est;
    est.mean = mean;
    est.std_error = count > 1 ? std::sqrt(m2 / static_cast<double>(count - 1) / static_cast<double>(count)) : 0.0;
    return est;
}

}  // namespace edcnn
