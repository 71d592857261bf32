#include "edcnn/compiler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace edcnn {

namespace {

// Pre-activation floor the tight schedule enforces on every inner layer.
constexpr double kInnerFloor = 1.0;
// Extra negative offset for pre-activations that must be switched off by the final ReLU.
constexpr double kOffMargin = 1.0;
constexpr double kSuffixTolerance = 1e-10;

Eigen::VectorXd to_eigen(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector from_eigen(const Eigen::VectorXd& v) { return Vector(v.data(), v.data() + v.size()); }

void add_scalar(Vector& v, double b) {
    for (double& x : v) x += b;
}

// Range of (T^u x)_r over the box [0, upper] for every row r of T^u with `rows` rows.
void row_ranges(const Filter& u, std::span<const double> upper, std::size_t rows, Vector& lo, Vector& hi) {
    lo.assign(rows, 0.0);
    hi.assign(rows, 0.0);
    for (std::size_t i = 0; i < upper.size(); ++i) {
        if (upper[i] == 0.0) continue;
        for (std::size_t t = 0; t <= u.bound() && i + t < rows; ++t) {
            const double c = u[static_cast<std::ptrdiff_t>(t)] * upper[i];
            if (c < 0.0) lo[i + t] += c;
            else hi[i + t] += c;
        }
    }
}

// Vertices of the box spanned by the first `dims` coordinates of `upper`.
std::vector<Vector> box_vertices(std::span<const double> upper, std::size_t dims) {
    std::vector<Vector> out;
    if (dims > 10) return out;
    for (std::size_t mask = 0; mask < (std::size_t{1} << dims); ++mask) {
        Vector x(upper.size(), 0.0);
        for (std::size_t i = 0; i < dims; ++i) x[i] = (mask >> i) & 1 ? upper[i] : 0.0;
        out.push_back(std::move(x));
    }
    return out;
}

// Probes as columns; returns pooled outputs and the smallest inner pre-activation.
Matrix run_block(const std::vector<ConvLayer>& layers, const Matrix& X, double& min_inner) {
    Matrix V = X;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        V = apply_layer_batch(layers[l], V, l + 1 < layers.size() ? &min_inner : nullptr);
    }
    return V;
}

Matrix as_columns(const std::vector<Vector>& points, std::size_t rows) {
    Matrix X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(points.size()));
    for (std::size_t p = 0; p < points.size(); ++p) X.col(static_cast<Eigen::Index>(p)) = to_eigen(points[p]);
    return X;
}

std::string describe(const CompileReport& r) {
    std::ostringstream os;
    os << "depth=" << r.depth << " probes=" << r.probe_count << " max_abs_error=" << r.max_abs_error
       << " max_suffix_abs=" << r.max_suffix_abs << " min_preactivation=" << r.min_preactivation;
    return os.str();
}

}  // namespace

std::size_t compiled_depth(std::size_t in, std::size_t out, std::size_t s) {
    if (s < 2) throw InvalidArgument("compiled_depth: s must be at least 2");
    if (in == 0 || out == 0) throw InvalidArgument("compiled_depth: empty block");
    const std::size_t n = in * out;
    return n / (s - 1) + (n % (s - 1) != 0 ? 1 : 0);
}

Filter stack_rows(const Matrix& weights) {
    const auto rows = static_cast<std::size_t>(weights.rows());
    const auto cols = static_cast<std::size_t>(weights.cols());
    if (rows == 0 || cols == 0) throw InvalidArgument("stack_rows: empty matrix");
    if (weights.isZero(0.0)) throw InvalidArgument("stack_rows: zero matrix cannot be factorized");
    std::vector<double> u(rows * cols);
    // Row (j+1)*cols of T^u (1-based) reads u[(j+1)*cols - i] at column i, i = 1..cols.
    for (std::size_t j = 0; j < rows; ++j) {
        for (std::size_t t = 0; t < cols; ++t) {
            u[j * cols + t] = weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(cols - 1 - t));
        }
    }
    return Filter(std::move(u));
}

BiasSchedule bias_bounds(std::span<const Filter> factors, double input_bound) {
    if (factors.empty()) throw InvalidArgument("bias_bounds: empty factor chain");
    if (!(input_bound > 0.0)) throw InvalidArgument("bias_bounds: input bound must be positive");
    BiasSchedule schedule;
    schedule.bounds.push_back(input_bound);
    double scale = 1.0;
    for (std::size_t l = 0; l < factors.size(); ++l) {
        const double norm = factors[l].l1_norm();
        if (norm == 0.0) throw InvalidArgument("bias_bounds: factor " + std::to_string(l + 1) + " is zero");
        schedule.bounds.push_back(norm * schedule.bounds.back());
        schedule.inner_biases.push_back(scale * schedule.bounds.back());
        scale *= 2.0;
    }
    return schedule;
}

BiasSchedule tight_bias_schedule(std::span<const Filter> factors, std::span<const double> input_upper) {
    if (factors.empty()) throw InvalidArgument("tight_bias_schedule: empty factor chain");
    if (input_upper.empty()) throw InvalidArgument("tight_bias_schedule: empty input");
    for (double u : input_upper) {
        if (!(u >= 0.0) || !std::isfinite(u)) throw InvalidArgument("tight_bias_schedule: invalid box bound");
    }
    BiasSchedule schedule;
    schedule.bounds.push_back(*std::max_element(input_upper.begin(), input_upper.end()));
    Filter prefix = Filter::delta();
    Vector image(input_upper.size(), 0.0);  // bias image at x = 0
    Vector lo, hi;
    for (const auto& w : factors) {
        prefix = convolve(w, prefix);
        image = conv_padded(w, image);
        row_ranges(prefix, input_upper, image.size(), lo, hi);
        double shift = 0.0;
        double bound = 0.0;
        for (std::size_t r = 0; r < image.size(); ++r) {
            shift = std::max(shift, kInnerFloor - lo[r] - image[r]);
            bound = std::max({bound, -lo[r], hi[r]});
        }
        add_scalar(image, shift);
        schedule.inner_biases.push_back(shift);
        schedule.bounds.push_back(bound);
    }
    return schedule;
}

ChainEvaluation evaluate_chain(std::span<const Filter> factors, const BiasSchedule& schedule,
                               std::span<const double> x) {
    if (factors.size() != schedule.depth()) throw InvalidArgument("evaluate_chain: schedule depth mismatch");
    if (x.empty()) throw InvalidArgument("evaluate_chain: empty input");
    ChainEvaluation eval;
    eval.min_preactivation = std::numeric_limits<double>::infinity();

    // Left side: the restricted convolution chain.
    Vector h(x.begin(), x.end());
    for (std::size_t l = 0; l < factors.size(); ++l) {
        h = conv_padded(factors[l], h);
        add_scalar(h, schedule.inner_biases[l]);
        for (double t : h) eval.min_preactivation = std::min(eval.min_preactivation, t);
        h = relu(h);
        eval.relu_chain.push_back(h);
    }

    // Right side: Toeplitz products applied to x and to each bias vector.
    const Eigen::VectorXd xv = to_eigen(x);
    std::vector<std::size_t> widths{x.size()};
    for (const auto& f : factors) widths.push_back(widths.back() + f.bound());
    std::vector<Matrix> toeplitz;
    for (std::size_t l = 0; l < factors.size(); ++l) {
        toeplitz.push_back(toeplitz_matrix(factors[l], widths[l + 1], widths[l]));
    }
    for (std::size_t l = 0; l < factors.size(); ++l) {
        Eigen::VectorXd acc = xv;
        for (std::size_t i = 0; i <= l; ++i) acc = toeplitz[i] * acc;
        acc.array() += schedule.inner_biases[l];
        for (std::size_t k = 0; k < l; ++k) {
            Eigen::VectorXd term = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(widths[k + 1]),
                                                             schedule.inner_biases[k]);
            for (std::size_t i = k + 1; i <= l; ++i) term = toeplitz[i] * term;
            acc += term;
        }
        Vector rhs = from_eigen(acc);
        for (std::size_t j = 0; j < rhs.size(); ++j) {
            eval.max_disagreement = std::max(eval.max_disagreement, std::abs(rhs[j] - eval.relu_chain[l][j]));
        }
        eval.affine_form.push_back(std::move(rhs));
    }
    return eval;
}

Vector chain_affine_identity(std::span<const Filter> factors, const BiasSchedule& schedule,
                             std::span<const double> x, double tolerance) {
    ChainEvaluation eval = evaluate_chain(factors, schedule, x);
    if (!(eval.max_disagreement <= tolerance)) {
        std::ostringstream msg;
        msg << "chain_affine_identity: ReLU chain and affine form differ by " << eval.max_disagreement
            << " (min pre-activation " << eval.min_preactivation << "); bias schedule too small";
        throw NumericalFailure(msg.str());
    }
    return eval.relu_chain.back();
}

CompiledBlock compile_block(const AffineBlock& block, std::size_t s, std::span<const double> input_upper,
                            const CompileOptions& options) {
    const std::size_t in = block.input_dim();
    const std::size_t out = block.output_dim();
    if (s < 2) throw InvalidArgument("compile_block: s must be at least 2");
    if (in == 0 || out == 0) throw InvalidArgument("compile_block: empty weight matrix");
    if (block.bias.size() != out) throw InvalidArgument("compile_block: bias size does not match W rows");
    if (input_upper.size() < in) throw InvalidArgument("compile_block: input box narrower than W");
    for (std::size_t i = in; i < input_upper.size(); ++i) {
        if (input_upper[i] != 0.0) throw InvalidArgument("compile_block: zero-extended inputs must have bound 0");
    }
    const std::size_t n = input_upper.size();
    const std::size_t L = compiled_depth(in, out, s);

    std::vector<Filter> factors;
    if (block.weights.isZero(0.0)) {
        factors.push_back(Filter());
    } else {
        factors = factorize_filter(stack_rows(block.weights), s).factors;
    }
    factors = pad_with_deltas(FactorizationResult{std::move(factors)}, L).factors;
    for (auto& f : factors) f = f.with_bound(s);

    const BiasSchedule schedule =
        options.bias_mode == BiasMode::Tight
            ? tight_bias_schedule(factors, input_upper)
            : bias_bounds(factors, std::max(1.0, *std::max_element(input_upper.begin(), input_upper.end())));

    CompiledBlock result;
    result.input_width = n;
    // Bias image of the inner layers, i.e. the chain's value at x = 0.
    Vector image(n, 0.0);
    for (std::size_t l = 0; l + 1 < L; ++l) {
        image = conv_padded(factors[l], image);
        add_scalar(image, schedule.inner_biases[l]);
        result.layers.push_back({factors[l], Vector(image.size(), schedule.inner_biases[l]), 1});
    }
    const Vector carried = conv_padded(factors[L - 1], image);
    const std::size_t final_width = carried.size();

    Vector lo, hi;
    row_ranges(reconstruct(factors), input_upper, final_width, lo, hi);
    Vector final_bias(final_width);
    for (std::size_t k = 0; k < final_width; ++k) final_bias[k] = -carried[k] - hi[k] - kOffMargin;
    for (std::size_t j = 0; j < out; ++j) {
        const std::size_t k = (j + 1) * in - 1;
        final_bias[k] = block.bias[j] - carried[k];
    }
    result.layers.push_back({factors[L - 1], std::move(final_bias), in});
    result.output_width = final_width / in;

    result.output_upper.assign(result.output_width, 0.0);
    for (std::size_t j = 0; j < out; ++j) {
        double acc = block.bias[j];
        for (std::size_t i = 0; i < in; ++i) {
            acc += std::max(block.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)), 0.0) *
                   input_upper[i];
        }
        result.output_upper[j] = std::max(acc, 0.0);
    }

    CompileReport& report = result.report;
    report.depth = L;
    report.pooling_size = in;
    report.widths.push_back(n);
    for (const auto& layer : result.layers) report.widths.push_back(layer.bias.size());
    report.widths.back() = result.output_width;
    report.min_preactivation = std::numeric_limits<double>::infinity();

    std::vector<Vector> probes = box_vertices(input_upper, in);
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t p = 0; p < options.probes; ++p) {
        Vector x(n, 0.0);
        for (std::size_t i = 0; i < in; ++i) x[i] = unit(rng) * input_upper[i];
        probes.push_back(std::move(x));
    }
    if (!probes.empty()) {
        const Matrix X = as_columns(probes, n);
        const Matrix pooled = run_block(result.layers, X, report.min_preactivation);
        const Matrix expected = ((block.weights * X.topRows(static_cast<Eigen::Index>(in))).colwise() +
                                 to_eigen(block.bias))
                                    .cwiseMax(0.0);
        const auto outs = static_cast<Eigen::Index>(out);
        report.max_abs_error = (pooled.topRows(outs) - expected).cwiseAbs().maxCoeff();
        if (pooled.rows() > outs) report.max_suffix_abs = pooled.bottomRows(pooled.rows() - outs).cwiseAbs().maxCoeff();
    }
    report.probe_count = probes.size();

    const bool exact = report.max_abs_error <= options.tolerance && report.max_suffix_abs <= kSuffixTolerance &&
                       !(report.min_preactivation < 0.0);
    if (!exact) {
        report.status = "probe mismatch";
        throw CompileError("compile_block: " + describe(report), report);
    }
    report.status = "ok";
    return result;
}

CompiledBlock compile_block(const AffineBlock& block, std::size_t s, const CompileOptions& options) {
    const Vector upper(block.input_dim(), 1.0);
    return compile_block(block, s, upper, options);
}

CompiledNetwork compile_dfcn(const DFCN& net, std::size_t s, const CompileOptions& options) {
    const std::size_t d = net.input_dim();
    std::vector<ConvLayer> layers;
    std::vector<CompileReport> block_reports;
    Vector upper(d, 1.0);
    std::size_t outputs = d;
    for (std::size_t b = 0; b < net.layers().size(); ++b) {
        const auto& layer = net.layers()[b];
        CompileOptions block_options = options;
        block_options.seed = options.seed + 7919 * (b + 1);
        CompiledBlock compiled = compile_block({layer.weights, layer.bias}, s, upper, block_options);
        for (auto& l : compiled.layers) layers.push_back(std::move(l));
        block_reports.push_back(std::move(compiled.report));
        upper = std::move(compiled.output_upper);
        outputs = static_cast<std::size_t>(layer.weights.rows());
    }
    Vector output(upper.size(), 0.0);
    std::copy_n(net.output_weights().begin(), outputs, output.begin());
    PooledEDCNN compiled(d, s, std::move(layers), std::move(output));

    CompileReport report;
    report.depth = compiled.depth();
    report.widths = compiled.widths();
    report.pooling_size = block_reports.empty() ? 1 : block_reports.back().pooling_size;
    report.min_preactivation = std::numeric_limits<double>::infinity();
    for (const auto& r : block_reports) {
        report.max_suffix_abs = std::max(report.max_suffix_abs, r.max_suffix_abs);
        report.min_preactivation = std::min(report.min_preactivation, r.min_preactivation);
    }

    std::vector<Vector> probes = box_vertices(Vector(d, 1.0), d);
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t p = 0; p < options.probes; ++p) {
        Vector x(d);
        for (double& t : x) t = unit(rng);
        probes.push_back(std::move(x));
    }
    const Matrix X = as_columns(probes, d);
    const Eigen::VectorXd got = compiled.evaluate_batch(X);
    for (std::size_t p = 0; p < probes.size(); ++p) {
        report.max_abs_error =
            std::max(report.max_abs_error, std::abs(got(static_cast<Eigen::Index>(p)) - net.evaluate(probes[p])));
    }
    report.probe_count = probes.size();
    if (!(report.max_abs_error <= options.tolerance)) {
        report.status = "probe mismatch";
        throw CompileError("compile_dfcn: " + describe(report), report);
    }
    report.status = "ok";
    return {std::move(compiled), std::move(report), std::move(block_reports)};
}

}  // namespace edcnn
