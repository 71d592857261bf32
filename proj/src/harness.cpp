#include "edcnn/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "edcnn/errors.hpp"
#include "edcnn/network_io.hpp"

#ifndef EDCNN_VERSION
#define EDCNN_VERSION "unknown"
#endif

namespace edcnn {

namespace {

using json = nlohmann::json;

constexpr const char* kCsvHeader = "scale,metric,seed,stderr";

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double parse_real(std::string_view text, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ParseError("line " + std::to_string(line) + ": invalid number '" + std::string(text) + "'");
    }
    return value;
}

// Runs task(i) for i < count on up to `jobs` threads; results land at index i.
template <typename T, typename F>
std::vector<T> run_cells(std::size_t count, std::size_t jobs, F task) {
    std::vector<T> out(count);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = task(i);
        return out;
    }
    for (std::size_t first = 0; first < count; first += jobs) {
        std::vector<std::future<T>> batch;
        for (std::size_t i = first; i < std::min(count, first + jobs); ++i) {
            batch.push_back(std::async(std::launch::async, task, i));
        }
        for (std::size_t k = 0; k < batch.size(); ++k) out[first + k] = batch[k].get();
    }
    return out;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(std::string("config field '") + key + "' has the wrong type");
    }
}

Optimizer optimizer_from_string(const std::string& name) {
    if (name == "gd" || name == "gradient-descent") return Optimizer::GradientDescent;
    if (name == "gauss-newton" || name == "gn") return Optimizer::GaussNewton;
    throw InvalidArgument("unknown optimizer '" + name + "'");
}

std::string optimizer_name(Optimizer o) { return o == Optimizer::GaussNewton ? "gauss-newton" : "gd"; }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double sine_gradient_bound(std::size_t d, std::size_t points) {
    if (d == 0) throw InvalidArgument("sine_gradient_bound: d must be positive");
    const auto per_axis = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(points), 1.0 / static_cast<double>(d)))));
    const double pi = std::numbers::pi;
    std::vector<std::size_t> idx(d, 0);
    double best = 0.0;
    while (true) {
        Vector s(d), c(d);
        for (std::size_t k = 0; k < d; ++k) {
            const double x = static_cast<double>(idx[k]) / static_cast<double>(per_axis - 1);
            s[k] = std::sin(pi * x);
            c[k] = std::cos(pi * x);
        }
        double norm2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            double g = pi * c[k];
            for (std::size_t j = 0; j < d; ++j) {
                if (j != k) g *= s[j];
            }
            norm2 += g * g;
        }
        best = std::max(best, std::sqrt(norm2));
        std::size_t k = 0;
        while (k < d && ++idx[k] == per_axis) idx[k++] = 0;
        if (k == d) break;
    }
    return best;
}

std::vector<SmoothTarget> builtin_targets(std::size_t d) {
    if (d == 0) throw InvalidArgument("builtin_targets: d must be positive");
    std::vector<SmoothTarget> out;
    out.push_back({"abs", d, 1.0, 1.0, 1.0, "|f(x)-f(y)| <= |x_1-y_1| by the triangle inequality",
                   [](std::span<const double> x) { return std::abs(x[0] - 0.5); }});
    out.push_back({"sine", d, 1.0, sine_gradient_bound(d), 1.0,
                   "analytic; c0 = max |grad f| over a grid, attained at the faces (pi)",
                   [](std::span<const double> x) {
                       double p = 1.0;
                       for (double t : x) p *= std::sin(std::numbers::pi * t);
                       return p;
                   }});
    out.push_back({"relu_pow", d, 1.5, 1.5, 1.0,
                   "f' = 1.5 (x_1-1/2)_+^(1/2) is Hoelder-1/2 with constant 1.5; |f| <= 2^(-3/2)",
                   [](std::span<const double> x) {
                       const double t = std::max(0.0, x[0] - 0.5);
                       return t * std::sqrt(t);
                   }});
    return out;
}

SmoothTarget find_target(std::string_view id, std::size_t d) {
    for (auto& t : builtin_targets(d)) {
        if (t.id == id) return t;
    }
    throw InvalidArgument("unknown target '" + std::string(id) + "'");
}

void RateTable::validate() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& a = rows[i - 1];
        const auto& b = rows[i];
        if (b.scale < a.scale || (b.scale == a.scale && b.seed <= a.seed)) {
            throw InvalidArgument("RateTable: rows must be sorted by (scale, seed) without duplicates");
        }
    }
}

std::vector<double> RateTable::scales() const {
    std::vector<double> out;
    for (const auto& r : rows) {
        if (out.empty() || out.back() != r.scale) out.push_back(r.scale);
    }
    return out;
}

std::string to_csv(const RateTable& table) {
    table.validate();
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& r : table.rows) {
        out += format_real(r.scale) + ',' + format_real(r.metric) + ',' + std::to_string(r.seed) + ',' +
               format_real(r.std_error) + '\n';
    }
    return out;
}

RateTable rate_table_from_csv(std::string_view csv) {
    RateTable table;
    std::size_t line_no = 0;
    bool header = false;
    while (!csv.empty()) {
        const auto end = csv.find('\n');
        std::string_view line = csv.substr(0, end);
        csv = end == std::string_view::npos ? std::string_view{} : csv.substr(end + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!header) {
            if (line != kCsvHeader) throw ParseError("expected header '" + std::string(kCsvHeader) + "'");
            header = true;
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        std::size_t start = 0;
        for (std::size_t pos; (pos = line.find(',', start)) != std::string_view::npos; start = pos + 1) {
            cells.push_back(line.substr(start, pos - start));
        }
        cells.push_back(line.substr(start));
        if (cells.size() != 4) throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields");
        RateRow row;
        row.scale = parse_real(cells[0], line_no);
        row.metric = parse_real(cells[1], line_no);
        const auto [ptr, ec] = std::from_chars(cells[2].data(), cells[2].data() + cells[2].size(), row.seed);
        if (ec != std::errc() || ptr != cells[2].data() + cells[2].size() || cells[2].empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": invalid seed");
        }
        row.std_error = parse_real(cells[3], line_no);
        table.rows.push_back(row);
    }
    if (!header) throw ParseError("empty CSV");
    try {
        table.validate();
    } catch (const InvalidArgument& e) {
        throw ParseError(e.what());
    }
    return table;
}

std::vector<double> medians_by_scale(const RateTable& table) {
    std::vector<double> out;
    for (double scale : table.scales()) {
        std::vector<double> values;
        for (const auto& r : table.rows) {
            if (r.scale == scale && std::isfinite(r.metric)) values.push_back(r.metric);
        }
        out.push_back(values.empty() ? std::numeric_limits<double>::quiet_NaN() : median(std::move(values)));
    }
    return out;
}

SlopeFit slope_fit(const RateTable& table) {
    SlopeFit fit;
    std::vector<double> xs, ys;
    for (double scale : table.scales()) {
        std::vector<double> values;
        for (const auto& r : table.rows) {
            if (r.scale != scale) continue;
            if (std::isfinite(r.metric) && r.metric > 0.0) {
                values.push_back(r.metric);
            } else {
                fit.warnings.push_back("excluded row scale=" + format_real(r.scale) + " seed=" + std::to_string(r.seed) +
                                       " metric=" + format_real(r.metric));
            }
        }
        if (values.empty() || !(scale > 0.0)) continue;
        xs.push_back(std::log(scale));
        ys.push_back(std::log(median(std::move(values))));
    }
    if (xs.size() < 3) throw InvalidArgument("slope_fit: need at least 3 scales with positive metrics");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i] / n;
        my += ys[i] / n;
    }
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    const double ss_res = std::max(0.0, syy - fit.slope * sxy);
    fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    fit.points = xs.size();
    return fit;
}

std::size_t depth_rule(std::size_t m, double r, std::size_t d) {
    if (m == 0 || d == 0 || !(r > 0.0)) throw InvalidArgument("depth_rule: m, d and r must be positive");
    const double exponent = static_cast<double>(d) / (4.0 * r + 2.0 * static_cast<double>(d));
    const double raw = std::pow(static_cast<double>(m), exponent);
    const double rounded = std::round(raw);
    const double value = std::abs(raw - rounded) <= 1e-9 * raw ? rounded : std::ceil(raw);
    return std::max<std::size_t>(1, static_cast<std::size_t>(value));
}

void ExperimentConfig::validate() const {
    if (kind != "approx-rate" && kind != "learn-rate") throw InvalidArgument("unknown experiment kind '" + kind + "'");
    if (d == 0) throw InvalidArgument("d must be positive");
    if (s < 2) throw InvalidArgument("s must be at least 2");
    if (grid.empty()) throw InvalidArgument("grid must be nonempty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] == 0) throw InvalidArgument("grid entries must be positive");
        if (i > 0 && grid[i] <= grid[i - 1]) throw InvalidArgument("grid must be strictly increasing");
    }
    if (seeds.empty()) throw InvalidArgument("seeds must be nonempty");
    for (std::size_t i = 1; i < seeds.size(); ++i) {
        if (seeds[i] <= seeds[i - 1]) throw InvalidArgument("seeds must be strictly increasing");
    }
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw InvalidArgument("noise must be a non-negative number");
    if (train_size < 2) throw InvalidArgument("train_size must be at least 2");
    if (eval_points == 0 || n_mc == 0) throw InvalidArgument("evaluation sizes must be positive");
    if (kind == "learn-rate" && pool_size != 0 && pool_size < grid.back()) {
        throw InvalidArgument("pool_size must cover the largest m");
    }
    if (jobs == 0) throw InvalidArgument("jobs must be at least 1");
    train.validate();
}

TrainConfig harness_train_defaults() {
    TrainConfig c;
    c.optimizer = Optimizer::GaussNewton;
    c.epochs = 300;
    c.restarts = 8;
    return c;
}

TrainConfig train_config_from_json(const json& j) {
    if (!j.is_object()) throw InvalidArgument("train config must be an object");
    TrainConfig c = harness_train_defaults();
    c.optimizer = optimizer_from_string(get_or<std::string>(j, "optimizer", optimizer_name(c.optimizer)));
    c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
    c.epochs = get_or(j, "epochs", c.epochs);
    c.restarts = get_or(j, "restarts", c.restarts);
    c.seed = get_or(j, "seed", c.seed);
    c.M = get_or(j, "M", c.M);
    c.growth = get_or(j, "growth", c.growth);
    c.min_step = get_or(j, "min_step", c.min_step);
    c.armijo = get_or(j, "armijo", c.armijo);
    c.tolerance = get_or(j, "tolerance", c.tolerance);
    c.damping = get_or(j, "damping", c.damping);
    c.init_scale = get_or(j, "init_scale", c.init_scale);
    c.jobs = get_or(j, "jobs", c.jobs);
    c.validate();
    return c;
}

json to_json(const TrainConfig& c) {
    return {{"optimizer", optimizer_name(c.optimizer)},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"restarts", c.restarts},
            {"seed", c.seed},
            {"M", c.M},
            {"growth", c.growth},
            {"min_step", c.min_step},
            {"armijo", c.armijo},
            {"tolerance", c.tolerance},
            {"damping", c.damping},
            {"init_scale", c.init_scale},
            {"jobs", c.jobs},
            {"init", "filters U[-c/sqrt(s+1), c/sqrt(s+1)] with c = init_scale, biases 0, "
                     "output weights U[-1/sqrt(width), 1/sqrt(width)]"}};
}

ExperimentConfig experiment_from_json(const json& j, std::string_view kind) {
    if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
    ExperimentConfig c;
    c.kind = get_or<std::string>(j, "kind", std::string(kind));
    if (c.kind != kind) throw InvalidArgument("config kind '" + c.kind + "' does not match '" + std::string(kind) + "'");
    c.target = get_or(j, "target", c.target);
    c.d = get_or(j, "d", c.d);
    c.s = get_or(j, "s", c.s);
    if (!j.contains("grid")) throw InvalidArgument("config is missing 'grid'");
    c.grid = get_or<std::vector<std::size_t>>(j, "grid", {});
    c.seeds = get_or(j, "seeds", c.seeds);
    c.noise = get_or(j, "noise", c.noise);
    c.train_size = get_or(j, "train_size", c.train_size);
    c.eval_points = get_or(j, "eval_points", c.eval_points);
    c.n_mc = get_or(j, "n_mc", c.n_mc);
    c.pool_size = get_or(j, "pool_size", c.pool_size);
    c.nested = get_or(j, "nested", c.nested);
    c.output = get_or(j, "output", c.output);
    c.jobs = get_or(j, "jobs", c.jobs);
    c.train = train_config_from_json(j.contains("train") ? j.at("train") : json::object());
    c.validate();
    return c;
}

json to_json(const ExperimentConfig& c) {
    return {{"kind", c.kind},         {"target", c.target},       {"d", c.d},
            {"s", c.s},               {"grid", c.grid},           {"seeds", c.seeds},
            {"noise", c.noise},       {"train_size", c.train_size}, {"eval_points", c.eval_points},
            {"n_mc", c.n_mc},         {"pool_size", c.pool_size}, {"nested", c.nested},
            {"output", c.output},     {"jobs", c.jobs},           {"train", to_json(c.train)}};
}

RateTable approx_rate_run(const SmoothTarget& target, const ExperimentConfig& config) {
    config.validate();
    if (target.d != config.d) throw InvalidArgument("approx_rate_run: target dimension differs from config.d");
    const std::size_t d = config.d;

    // Evaluation points: a midpoint grid for d = 1, uniform Monte-Carlo points otherwise.
    const std::size_t n_eval = d == 1 ? config.eval_points : config.n_mc;
    Matrix E(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n_eval));
    if (d == 1) {
        for (std::size_t i = 0; i < n_eval; ++i) E(0, static_cast<Eigen::Index>(i)) = (i + 0.5) / static_cast<double>(n_eval);
    } else {
        std::mt19937_64 rng(mix(0xe7a1, d));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (Eigen::Index i = 0; i < E.size(); ++i) E.data()[i] = unit(rng);
    }
    Vector want(n_eval);
    for (std::size_t i = 0; i < n_eval; ++i) {
        const auto col = E.col(static_cast<Eigen::Index>(i));
        want[i] = target(std::span<const double>(col.data(), d));
    }

    // One chain of depths per seed; chains run concurrently.
    auto chain = [&](std::size_t k) {
        const std::uint64_t seed = config.seeds[k];
        const std::size_t m = config.train_size;
        Matrix X(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
        if (d == 1) {
            for (std::size_t i = 0; i < m; ++i) X(0, static_cast<Eigen::Index>(i)) = static_cast<double>(i) / static_cast<double>(m - 1);
        } else {
            std::mt19937_64 rng(mix(seed, 0xa99));
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = unit(rng);
        }
        Vector y(m);
        for (std::size_t i = 0; i < m; ++i) {
            const auto col = X.col(static_cast<Eigen::Index>(i));
            y[i] = std::clamp(target(std::span<const double>(col.data(), d)), -target.M, target.M);
        }
        const Dataset data(std::move(X), std::move(y), target.M);

        std::vector<RateRow> rows;
        std::optional<PooledEDCNN> previous;
        for (std::size_t L : config.grid) {
            TrainConfig train = config.train;
            train.seed = mix(seed, L);
            train.M = target.M;
            RateRow row{static_cast<double>(L), std::numeric_limits<double>::quiet_NaN(), seed, 0.0};
            try {
                const PooledEDCNN* warm = nullptr;
                if (config.nested && previous) {
                    try {
                        (void)embed_network(*previous, L);
                        warm = &*previous;
                    } catch (const InvalidArgument&) {
                        // An appended layer would pool, so the embedding is not exact; start fresh.
                    }
                }
                const TrainedModel model = erm_train(data, L, config.s, train, warm);
                const Eigen::VectorXd got = model.network.evaluate_batch(E);
                double sup = 0.0;
                for (std::size_t i = 0; i < n_eval; ++i) {
                    sup = std::max(sup, std::abs(truncate(got(static_cast<Eigen::Index>(i)), target.M) - want[i]));
                }
                row.metric = sup;
                previous = model.network;
            } catch (const NumericalFailure&) {
                previous.reset();
            }
            rows.push_back(row);
        }
        return rows;
    };
    const auto per_seed = run_cells<std::vector<RateRow>>(config.seeds.size(), config.jobs, chain);

    RateTable table{config.kind, target.id, config.s, d, {}};
    for (std::size_t li = 0; li < config.grid.size(); ++li) {
        for (const auto& rows : per_seed) table.rows.push_back(rows[li]);
    }
    table.validate();
    return table;
}

RateTable learn_rate_run(const SmoothTarget& target, const ExperimentConfig& config) {
    config.validate();
    if (target.d != config.d) throw InvalidArgument("learn_rate_run: target dimension differs from config.d");
    const std::size_t d = config.d;
    const std::size_t pool = config.pool_size == 0 ? config.grid.back() : config.pool_size;

    // One pool of noisy samples per seed; sample size m uses its first m points.
    std::vector<Matrix> inputs;
    std::vector<Vector> targets;
    for (std::uint64_t seed : config.seeds) {
        std::mt19937_64 rng(mix(seed, 0xda7a));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_real_distribution<double> noise(-config.noise, config.noise);
        Matrix X(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(pool));
        Vector y(pool);
        for (std::size_t i = 0; i < pool; ++i) {
            for (std::size_t k = 0; k < d; ++k) X(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = unit(rng);
            const auto col = X.col(static_cast<Eigen::Index>(i));
            const double eps = config.noise > 0.0 ? noise(rng) : 0.0;
            y[i] = std::clamp(target(std::span<const double>(col.data(), d)) + eps, -target.M, target.M);
        }
        inputs.push_back(std::move(X));
        targets.push_back(std::move(y));
    }

    const std::size_t n_seeds = config.seeds.size();
    auto cell = [&](std::size_t index) {
        const std::size_t mi = index / n_seeds;
        const std::size_t k = index % n_seeds;
        const std::size_t m = config.grid[mi];
        const std::uint64_t seed = config.seeds[k];
        RateRow row{static_cast<double>(m), std::numeric_limits<double>::quiet_NaN(), seed, 0.0};
        const Dataset data(inputs[k].leftCols(static_cast<Eigen::Index>(m)),
                           Vector(targets[k].begin(), targets[k].begin() + static_cast<std::ptrdiff_t>(m)), target.M);
        TrainConfig train = config.train;
        train.seed = mix(seed, m);
        train.M = target.M;
        try {
            const TrainedModel model = erm_train(data, depth_rule(m, target.r, d), config.s, train);
            const auto est = excess_risk(model.network, target.f, config.n_mc, target.M, mix(seed, 0x3c));
            row.metric = est.mean;
            row.std_error = est.std_error;
        } catch (const NumericalFailure&) {
        }
        return row;
    };
    RateTable table{config.kind, target.id, config.s, d, {}};
    table.rows = run_cells<RateRow>(config.grid.size() * n_seeds, config.jobs, cell);
    table.validate();
    return table;
}

std::string version_string() { return EDCNN_VERSION; }

json run_manifest(const ExperimentConfig& config, const RateTable& table) {
    std::size_t failed = 0;
    for (const auto& r : table.rows) failed += std::isfinite(r.metric) ? 0 : 1;
    json manifest{{"version", version_string()},
                  {"kind", table.kind},
                  {"target", table.target},
                  {"s", table.s},
                  {"d", table.d},
                  {"seed", config.seeds},
                  {"rows", table.rows.size()},
                  {"failed_rows", failed},
                  {"config", to_json(config)}};
    if (config.kind == "learn-rate") {
        json depths = json::array();
        const auto target = find_target(config.target, config.d);
        for (std::size_t m : config.grid) depths.push_back(depth_rule(m, target.r, config.d));
        manifest["depths"] = depths;
    }
    return manifest;
}

}  // namespace edcnn
