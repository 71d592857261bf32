// One PASS/FAIL line per acceptance criterion. Extra arguments are paths to DFCN JSON files
// whose compiled versions are checked in criterion 8 next to the built-in approximants.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "edcnn/compiler.hpp"
#include "edcnn/factorization.hpp"
#include "edcnn/harness.hpp"
#include "edcnn/network_io.hpp"
#include "edcnn/training.hpp"
#include "test_util.hpp"

namespace {

using namespace edcnn;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool ok, const std::string& name, const std::string& detail) {
    std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---- oracles -------------------------------------------------------------------------------

// (a * b)_j = sum_k a_k b_{j-k}
Vector literal_convolve(std::span<const double> a, std::span<const double> b) {
    Vector out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t k = 0; k < b.size(); ++k) out[i + k] += a[i] * b[k];
    }
    return out;
}

// T(i, k) = w_{i-k}, rows x cols.
Matrix literal_toeplitz(std::span<const double> w, std::size_t rows, std::size_t cols) {
    Matrix T = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t k = 0; k < cols && k <= i; ++k) {
            if (i - k < w.size()) T(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = w[i - k];
        }
    }
    return T;
}

double literal_dfcn(const DFCN& net, std::span<const double> x) {
    Vector h(x.begin(), x.end());
    for (const auto& layer : net.layers()) {
        Vector z(static_cast<std::size_t>(layer.weights.rows()));
        for (std::size_t i = 0; i < z.size(); ++i) {
            double acc = layer.bias[i];
            for (std::size_t k = 0; k < h.size(); ++k) acc += layer.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * h[k];
            z[i] = std::max(0.0, acc);
        }
        h = std::move(z);
    }
    double y = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) y += net.output_weights()[k] * h[k];
    return y;
}

// Forward pass written out loop by loop; `margin` receives the smallest |pre-activation| and the
// smallest gap between a positive pooling winner and its runner-up.
double literal_edcnn(const PooledEDCNN& net, std::span<const double> x, double* margin = nullptr) {
    Vector h(x.begin(), x.end());
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& layer : net.layers()) {
        const auto w = layer.filter.coeffs();
        Vector z(h.size() + net.filter_length(), 0.0);
        for (std::size_t j = 0; j < z.size(); ++j) {
            double acc = layer.bias[j];
            for (std::size_t t = 0; t < w.size() && t <= j; ++t) {
                if (j - t < h.size()) acc += w[t] * h[j - t];
            }
            gap = std::min(gap, std::abs(acc));
            z[j] = std::max(0.0, acc);
        }
        const std::size_t u = layer.pool;
        Vector p(z.size() / u);
        for (std::size_t b = 0; b < p.size(); ++b) {
            double best = -1.0, second = -1.0;
            for (std::size_t k = b * u; k < (b + 1) * u; ++k) {
                if (z[k] > best) {
                    second = best;
                    best = z[k];
                } else {
                    second = std::max(second, z[k]);
                }
            }
            // A tie among dead units is no kink: the pooled value stays 0 nearby.
            if (u > 1 && best > 0.0) gap = std::min(gap, best - second);
            p[b] = best;
        }
        h = std::move(p);
    }
    if (margin) *margin = gap;
    double y = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) y += net.output_weights()[k] * h[k];
    return y;
}

double literal_risk(const PooledEDCNN& net, const Matrix& X, const Vector& y) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double e = literal_edcnn(net, std::span<const double>(X.col(c).data(), static_cast<std::size_t>(X.rows()))) - y[static_cast<std::size_t>(c)];
        sum += e * e;
    }
    return sum / static_cast<double>(X.cols());
}

Vector random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) { return testing::random_vector(rng, n, lo, hi); }

// ---- criteria ------------------------------------------------------------------------------

DFCN random_dfcn(std::mt19937_64& rng, std::size_t d, std::size_t width, std::size_t depth) {
    std::vector<AffineLayer> layers;
    std::size_t in = d;
    for (std::size_t l = 0; l < depth; ++l) {
        Matrix W(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(in));
        const auto w = random_vec(rng, width * in, -1.0, 1.0);
        std::copy(w.begin(), w.end(), W.data());
        layers.push_back({W, random_vec(rng, width, -1.0, 1.0)});
        in = width;
    }
    return DFCN(d, std::move(layers), random_vec(rng, width, -1.0, 1.0));
}

void criterion_compiler() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    std::string error;
    for (int n = 0; n < 20 && error.empty(); ++n) {
        const DFCN net = random_dfcn(rng, 2, 14, 3);
        try {
            const auto compiled = compile_dfcn(net, 2);
            Matrix X(2, 1000);
            for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = unit(rng);
            const Eigen::VectorXd got = compiled.network.evaluate_batch(X);
            for (Eigen::Index p = 0; p < X.cols(); ++p) {
                worst = std::max(worst, std::abs(got[p] - literal_dfcn(net, std::span<const double>(X.col(p).data(), 2))));
            }
        } catch (const std::exception& e) {
            error = e.what();
        }
    }
    const double t = seconds_since(t0);
    verdict(1, error.empty() && worst <= 1e-6 && t <= 30.0, "compiler exactness",
            error.empty() ? fmt("20 DFCNs (d=2, width 14, depth 3, s=2), 1000 probes each: max |error| %.3g (<= 1e-6), %.1f s (<= 30 s)", worst, t)
                          : "compile failed: " + error);
}

void criterion_factorization() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(202);
    const std::size_t ss[] = {2, 3, 5};
    double worst_err = 0.0;
    double worst_ratio = 0.0;  // factors / (S/(s-1) + 1)
    bool counts_ok = true;
    std::string error;
    for (int n = 0; n < 100; ++n) {
        const std::size_t S = 10 + rng() % 51;
        const std::size_t s = ss[n % 3];
        const Vector u = random_vec(rng, S + 1, -1.0, 1.0);
        try {
            const auto result = factorize_filter(Filter(u), s);
            Vector prod{1.0};
            for (const auto& f : result.factors) {
                if (f.bound() > s) counts_ok = false;
                prod = literal_convolve(f.coeffs(), prod);
            }
            double diff = 0.0, scale = 0.0;
            for (std::size_t k = 0; k < std::max(prod.size(), u.size()); ++k) {
                const double a = k < prod.size() ? prod[k] : 0.0;
                const double b = k < u.size() ? u[k] : 0.0;
                diff = std::max(diff, std::abs(a - b));
                scale = std::max(scale, std::abs(b));
            }
            worst_err = std::max(worst_err, diff / scale);
            const double limit = static_cast<double>(S) / static_cast<double>(s - 1) + 1.0;
            if (!(static_cast<double>(result.depth()) < limit)) counts_ok = false;
            worst_ratio = std::max(worst_ratio, static_cast<double>(result.depth()) / limit);
        } catch (const std::exception& e) {
            error = e.what();
            break;
        }
    }
    const double t = seconds_since(t0);
    verdict(2, error.empty() && worst_err <= 1e-6 && counts_ok && t <= 10.0, "filter factorization",
            error.empty() ? fmt("100 filters, S in 10..60, s in {2,3,5}: max relative error %.3g (<= 1e-6), "
                                "factor count < S/(s-1)+1 %s (max ratio %.3f), %.2f s (<= 10 s)",
                                worst_err, counts_ok ? "always" : "VIOLATED", worst_ratio, t)
                          : "factorization failed: " + error);
}

// Returns the largest |relu chain - affine form| and the smallest pre-activation over the chain.
std::pair<double, double> check_chain(const std::vector<Filter>& factors, const BiasSchedule& schedule, const Vector& x) {
    // Both sides computed from scratch: ReLU chain with literal convolutions, affine form with
    // literal Toeplitz products.
    Vector h = x;
    Vector affine_bias;  // sum_k T^l...T^(k+1) b^k 1 + b^l 1
    Matrix product = Matrix::Identity(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x.size()));
    double disagreement = 0.0, min_pre = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < factors.size(); ++l) {
        const auto w = factors[l].coeffs();
        const std::size_t rows = h.size() + 2;
        Vector z = literal_convolve(w, h);
        z.resize(rows, 0.0);
        for (double& v : z) {
            v += schedule.inner_biases[l];
            min_pre = std::min(min_pre, v);
            v = std::max(0.0, v);
        }
        h = std::move(z);

        const Matrix T = literal_toeplitz(w, rows, rows - 2);
        product = T * product;
        Vector next(rows, schedule.inner_biases[l]);
        if (!affine_bias.empty()) {
            const Eigen::VectorXd carried = T * Eigen::Map<const Eigen::VectorXd>(affine_bias.data(), static_cast<Eigen::Index>(affine_bias.size()));
            for (std::size_t i = 0; i < rows; ++i) next[i] += carried[static_cast<Eigen::Index>(i)];
        }
        affine_bias = std::move(next);
        const Eigen::VectorXd lin = product * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
        for (std::size_t i = 0; i < rows; ++i) {
            disagreement = std::max(disagreement, std::abs(h[i] - (lin[static_cast<Eigen::Index>(i)] + affine_bias[i])));
        }
    }
    return {disagreement, min_pre};
}

void criterion_chain_identity() {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst[2] = {0.0, 0.0};
    double min_pre[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    double library_gap = 0.0;
    for (int n = 0; n < 50; ++n) {
        const std::size_t length = 1 + rng() % 10;
        const std::size_t width = 2 + rng() % 5;  // s = 2 <= width
        std::vector<Filter> factors;
        for (std::size_t l = 0; l < length; ++l) factors.push_back(testing::random_filter(rng, 2));
        const BiasSchedule schedules[2] = {bias_bounds(factors), tight_bias_schedule(factors, Vector(width, 1.0))};
        for (int p = 0; p < 200; ++p) {
            Vector x(width);
            for (double& v : x) v = unit(rng);
            for (int k = 0; k < 2; ++k) {
                const auto [dis, pre] = check_chain(factors, schedules[k], x);
                worst[k] = std::max(worst[k], dis);
                min_pre[k] = std::min(min_pre[k], pre);
            }
            const auto eval = evaluate_chain(factors, schedules[0], x);
            library_gap = std::max(library_gap, eval.max_disagreement);
        }
    }
    const bool ok = worst[0] <= 1e-8 && worst[1] <= 1e-8 && min_pre[0] >= 0.0 && min_pre[1] >= 0.0 && library_gap <= 1e-8;
    verdict(3, ok, "ReLU chain / affine identity",
            fmt("50 chains (length <= 10, s=2), 200 probes each: doubling schedule max gap %.3g, min pre-activation %.3g; "
                "tight schedule max gap %.3g, min pre-activation %.3g (gap <= 1e-8, pre-activations >= 0)",
                worst[0], min_pre[0], worst[1], min_pre[1]));
}

void criterion_toeplitz() {
    std::mt19937_64 rng(404);
    double single = 0.0, single_library = 0.0;
    for (int n = 0; n < 1000; ++n) {
        const std::size_t S = 1 + rng() % 8;
        const std::size_t cols = 1 + rng() % 30;
        const Vector w = random_vec(rng, S + 1, -1.0, 1.0);
        const Vector v = random_vec(rng, cols, -1.0, 1.0);
        const Vector conv = conv_padded(Filter(w), v);
        const Eigen::VectorXd mv = literal_toeplitz(w, cols + S, cols) * Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(cols));
        const Eigen::VectorXd lib = toeplitz_matrix(Filter(w), cols) * Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(cols));
        if (conv.size() != cols + S) {
            single = std::numeric_limits<double>::infinity();
            break;
        }
        for (std::size_t i = 0; i < conv.size(); ++i) {
            single = std::max(single, std::abs(conv[i] - mv[static_cast<Eigen::Index>(i)]));
            single_library = std::max(single_library, std::abs(conv[i] - lib[static_cast<Eigen::Index>(i)]));
        }
    }
    double chain = 0.0;
    for (int n = 0; n < 200; ++n) {
        const std::size_t s = 2 + rng() % 3;
        const std::size_t d = s + rng() % 6;
        const std::size_t length = 1 + rng() % 6;
        Vector u{1.0};
        Matrix product = Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        std::size_t width = d;
        for (std::size_t l = 0; l < length; ++l) {
            const Filter w = testing::random_filter(rng, s);
            product = toeplitz_matrix(w, width) * product;
            width += s;
            u = literal_convolve(w.coeffs(), u);
            const Matrix direct = literal_toeplitz(u, width, d);
            chain = std::max(chain, (product - direct).cwiseAbs().maxCoeff());
        }
    }
    verdict(4, single <= 1e-12 && single_library <= 1e-12 && chain <= 1e-10, "Toeplitz / convolution equivalence",
            fmt("1000 pairs: max |T v - w*v| %.3g (library matrix %.3g, <= 1e-12); 200 chains of length <= 6: "
                "max |T^L...T^1 - T^(w^L*...*w^1)| %.3g (<= 1e-10)",
                single, single_library, chain));
}

void criterion_gradient() {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    std::size_t excluded = 0, kept = 0;
    int nets = 0;
    while (nets < 50) {
        const std::size_t d = 1 + rng() % 3;
        const std::size_t s = 2 + rng() % 2;
        const auto net = testing::random_network(rng, d, s, 1 + rng() % 6, 0.3);
        const std::size_t m = 1 + rng() % 32;
        std::vector<Vector> xs;
        Vector ys;
        for (std::size_t i = 0; i < m; ++i) {
            Vector x(d);
            for (double& v : x) v = unit(rng);
            double margin = 0.0;
            literal_edcnn(net, x, &margin);
            if (margin < 1e-4) {
                ++excluded;
                continue;
            }
            xs.push_back(std::move(x));
            ys.push_back(2.0 * unit(rng) - 1.0);
        }
        if (xs.empty()) continue;
        Matrix X(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(xs.size()));
        for (std::size_t c = 0; c < xs.size(); ++c) {
            for (std::size_t r = 0; r < d; ++r) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = xs[c][r];
        }
        kept += xs.size();
        ++nets;
        const Vector g = grad_empirical_risk(net, Dataset(X, ys, 1.0));
        Vector theta = flatten_parameters(net);
        const double h = 1e-6;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double saved = theta[k];
            theta[k] = saved + h;
            const double up = literal_risk(with_parameters(net, theta), X, ys);
            theta[k] = saved - h;
            const double down = literal_risk(with_parameters(net, theta), X, ys);
            theta[k] = saved;
            const double fd = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(g[k] - fd) / std::max({std::abs(g[k]), std::abs(fd), 1e-6}));
        }
    }
    verdict(5, worst <= 1e-4, "gradient correctness",
            fmt("50 networks (L <= 6, pooling), %zu samples kept, %zu kink-adjacent excluded: max relative error %.3g (<= 1e-4)",
                kept, excluded, worst));
}

void criterion_param_linearity() {
    // Exact linearity in L <=> every second difference of the integer counts is zero.
    struct Case {
        std::size_t d, s;
    };
    const Case cases[] = {{1, 2}, {2, 2}, {2, 3}};
    bool linear = true;
    bool bounded = true;
    std::string detail;
    for (const auto& c : cases) {
        std::mt19937_64 rng(1);
        std::vector<long long> counts;
        for (std::size_t L = 5; L <= 50; ++L) {
            const auto net = initial_network(c.d, c.s, L, rng);
            counts.push_back(static_cast<long long>(param_count(net)));
            const auto p = PoolParams::make(c.d, c.s);
            if (param_count(net) > (c.s + 1 + p.d_max) * L + p.d_max) bounded = false;
        }
        long long max_second = 0;
        for (std::size_t i = 2; i < counts.size(); ++i) {
            max_second = std::max(max_second, std::abs(counts[i] - 2 * counts[i - 1] + counts[i - 2]));
        }
        if (max_second != 0) linear = false;
        detail += fmt("(d=%zu,s=%zu) count(5)=%lld count(50)=%lld max |second difference| %lld; ", c.d, c.s, counts.front(),
                      counts.back(), max_second);
    }
    detail += bounded ? "linear upper bound (s+1+dmax)L+dmax holds" : "linear upper bound (s+1+dmax)L+dmax VIOLATED";
    detail += linear ? "" : " -- bias widths grow by s per layer below dmax, so the exact count is quadratic in L";
    verdict(6, linear, "parameter count linear in L", detail);
}

void criterion_learning_rate() {
    const auto t0 = Clock::now();
    ExperimentConfig c;
    c.kind = "learn-rate";
    c.target = "abs";
    c.grid = {64, 128, 256, 512, 1024, 2048, 4096};
    c.seeds = {0, 1, 2, 3, 4};
    c.noise = 0.3;
    c.n_mc = 100000;
    c.train.restarts = 32;
    c.train.epochs = 300;
    c.jobs = std::max(1u, std::thread::hardware_concurrency());
    const auto table = learn_rate_run(find_target("abs", 1), c);
    const auto medians = medians_by_scale(table);
    bool decreasing = true;
    std::string meds;
    for (std::size_t i = 0; i < medians.size(); ++i) {
        if (i > 0 && !(medians[i] < medians[i - 1])) decreasing = false;
        meds += fmt("%s%.3g", i ? " " : "", medians[i]);
    }
    double slope = std::numeric_limits<double>::quiet_NaN();
    try {
        slope = slope_fit(table).slope;
    } catch (const std::exception&) {
    }
    const double t = seconds_since(t0);
    verdict(7, decreasing && slope >= -1.1 && slope <= -0.3 && t <= 900.0, "learning-rate trend",
            fmt("|x-1/2|, m = 64..4096, 5 seeds, depths ceil(m^(1/6)): medians [%s] %s, slope %.3f (in [-1.1, -0.3]), %.0f s (<= 900 s)",
                meds.c_str(), decreasing ? "strictly decreasing" : "NOT strictly decreasing", slope, t));
}

double sup_error_on_grid(const std::function<double(double)>& f, const SmoothTarget& target) {
    double sup = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double x = (i + 0.5) / 10000.0;
        const Vector v{x};
        sup = std::max(sup, std::abs(f(x) - target(v)));
    }
    return sup;
}

std::vector<std::pair<std::string, DFCN>> builtin_approximants() {
    std::vector<std::pair<std::string, DFCN>> out;
    Matrix W(2, 1);
    W << 1.0, -1.0;
    // relu(x - 1/2) + relu(1/2 - x) is exact.
    out.emplace_back("exact", DFCN(1, {{W, {-0.5, 0.5}}}, {1.0, 1.0}));
    // Kink moved to 0.52: sup error 0.02.
    out.emplace_back("shifted kink", DFCN(1, {{W, {-0.52, 0.52}}}, {1.0, 1.0}));
    // Interpolant of |x - 1/2| at 0, 1/4, 3/4, 1, i.e. 1/2 - x + relu(x - 1/4) + relu(x - 3/4), passed
    // through an identity second layer: sup error 1/4 at x = 1/2.
    Matrix W1(4, 1);
    W1 << 1.0, 1.0, 1.0, 0.0;
    out.emplace_back("depth-2 interpolant",
                     DFCN(1, {{W1, {0.0, -0.25, -0.75, 0.5}}, {Matrix::Identity(4, 4), {0.0, 0.0, 0.0, 0.0}}}, {-1.0, 1.0, 1.0, 1.0}));
    return out;
}

void criterion_approximation(const std::vector<std::string>& extra) {
    const auto t0 = Clock::now();
    const auto target = find_target("abs", 1);
    ExperimentConfig c;
    c.kind = "approx-rate";
    c.grid = {4, 8, 16, 32};
    c.seeds = {0, 1, 2};
    c.train_size = 257;
    c.eval_points = 10000;
    c.nested = true;
    c.train.restarts = 16;
    c.train.epochs = 200;
    c.jobs = std::max(1u, std::thread::hardware_concurrency());
    const auto table = approx_rate_run(target, c);
    std::vector<double> best(c.grid.size(), std::numeric_limits<double>::infinity());
    for (const auto& r : table.rows) {
        for (std::size_t i = 0; i < c.grid.size(); ++i) {
            if (r.scale == static_cast<double>(c.grid[i]) && std::isfinite(r.metric)) best[i] = std::min(best[i], r.metric);
        }
    }
    bool monotone = true;
    std::string bests;
    for (std::size_t i = 0; i < best.size(); ++i) {
        if (i > 0 && !(best[i] <= 1.1 * best[i - 1])) monotone = false;
        bests += fmt("%sL=%zu %.3g", i ? ", " : "", c.grid[i], best[i]);
    }

    auto approximants = builtin_approximants();
    std::string load_error;
    for (const auto& path : extra) {
        try {
            std::ifstream in(path);
            if (!in) throw std::runtime_error("cannot open '" + path + "'");
            std::ostringstream buf;
            buf << in.rdbuf();
            approximants.emplace_back(path, deserialize_dfcn(buf.str()));
        } catch (const std::exception& e) {
            load_error = e.what();
        }
    }
    double worst_gap = 0.0;
    std::string sups, compile_error;
    for (const auto& [name, dfcn] : approximants) {
        if (dfcn.input_dim() != 1) {
            compile_error = name + " is not one-dimensional";
            continue;
        }
        try {
            const auto compiled = compile_dfcn(dfcn, 2);
            const double a = sup_error_on_grid([&](double x) { const Vector v{x}; return literal_dfcn(dfcn, v); }, target);
            const double b = sup_error_on_grid([&](double x) { const Vector v{x}; return compiled.network.evaluate(v); }, target);
            worst_gap = std::max(worst_gap, std::abs(a - b));
            sups += fmt("%s%s %.3g/%.3g", sups.empty() ? "" : ", ", name.c_str(), a, b);
        } catch (const std::exception& e) {
            compile_error = name + ": " + e.what();
        }
    }
    const bool ok = monotone && worst_gap <= 1e-6 && load_error.empty() && compile_error.empty();
    std::string detail = fmt("best-of-3 sup error [%s] %s (10%% slack); DFCN/compiled sup errors [%s], max gap %.3g (<= 1e-6); %.0f s",
                             bests.c_str(), monotone ? "non-increasing" : "NOT non-increasing", sups.c_str(), worst_gap, seconds_since(t0));
    if (!load_error.empty()) detail += "; load error: " + load_error;
    if (!compile_error.empty()) detail += "; compile error: " + compile_error;
    verdict(8, ok, "approximation monotonicity", detail);
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> extra(argv + 1, argv + argc);
    criterion_compiler();
    criterion_factorization();
    criterion_chain_identity();
    criterion_toeplitz();
    criterion_gradient();
    criterion_param_linearity();
    criterion_learning_rate();
    criterion_approximation(extra);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
