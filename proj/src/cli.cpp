#include "edcnn/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "edcnn/compiler.hpp"
#include "edcnn/errors.hpp"
#include "edcnn/factorization.hpp"
#include "edcnn/harness.hpp"
#include "edcnn/network_io.hpp"
#include "edcnn/training.hpp"

namespace edcnn {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Missing or unreadable files are validation errors (exit 1).
class FileError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write '" + path.string() + "'");
    out << text;
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(what + ": " + e.what(), e.byte);
    }
}

struct Config {
    json body;
    fs::path dir;  // relative paths inside the config resolve against this

    fs::path path(const std::string& p) const { return fs::path(p).is_absolute() ? fs::path(p) : dir / p; }
    bool has(const char* key) const { return body.contains(key); }
    template <typename T>
    T get(const char* key, T fallback) const {
        if (!body.contains(key)) return fallback;
        try {
            return body.at(key).get<T>();
        } catch (const json::exception&) {
            throw InvalidArgument(std::string("config field '") + key + "' has the wrong type");
        }
    }
    template <typename T>
    T require(const char* key) const {
        if (!body.contains(key)) throw InvalidArgument(std::string("config is missing '") + key + "'");
        return get<T>(key, T{});
    }
};

Config load_config(const std::string& path) {
    Config c;
    c.body = parse_json(read_file(path), "config '" + path + "'");
    if (!c.body.is_object()) throw InvalidArgument("config '" + path + "' must be a JSON object");
    c.dir = fs::path(path).parent_path();
    return c;
}

// Writes `doc` to the config's "output" path when present, else to `out`.
void emit(const Config& config, const json& doc, std::ostream& out) {
    const std::string text = doc.dump(2) + "\n";
    if (config.has("output")) {
        write_file(config.path(config.require<std::string>("output")), text);
    } else {
        out << text;
    }
}

json report_json(const CompileReport& r) {
    return {{"depth", r.depth},
            {"widths", r.widths},
            {"pooling_size", r.pooling_size},
            {"probe_count", r.probe_count},
            {"max_abs_error", r.max_abs_error},
            {"max_suffix_abs", r.max_suffix_abs},
            {"min_preactivation", r.min_preactivation},
            {"status", r.status}};
}

int run_factorize(const Config& config, std::ostream& out) {
    const Filter u(vector_from_json(config.body.contains("filter") ? config.body.at("filter") : json(),
                                    "config field 'filter'"));
    const auto s = config.require<std::size_t>("s");
    const FactorizationResult result = factorize_filter(u, s);
    json factors = json::array();
    for (const auto& f : result.factors) factors.push_back(to_json(f));
    const std::size_t S = u.effective_bound();
    emit(config,
         {{"version", version_string()},
          {"s", s},
          {"input", to_json(u)},
          {"support_bound", S},
          {"depth", result.depth()},
          {"depth_limit", static_cast<double>(S) / static_cast<double>(s - 1) + 1.0},
          {"factors", factors},
          {"reconstruction_error", result.reconstruction_error},
          {"imaginary_residue", result.imaginary_residue}},
         out);
    return 0;
}

DFCN load_dfcn(const Config& config) {
    if (!config.has("network")) throw InvalidArgument("config is missing 'network'");
    const json& net = config.body.at("network");
    if (net.is_string()) return deserialize_dfcn(read_file(config.path(net.get<std::string>())));
    return dfcn_from_json(net);
}

int run_compile(const Config& config, std::ostream& out) {
    const DFCN net = load_dfcn(config);
    const auto s = config.get<std::size_t>("s", 2);
    CompileOptions options;
    options.probes = config.get("probes", options.probes);
    options.seed = config.get("seed", options.seed);
    options.tolerance = config.get("tolerance", options.tolerance);
    const auto mode = config.get<std::string>("bias_mode", "tight");
    if (mode == "doubling") {
        options.bias_mode = BiasMode::Doubling;
    } else if (mode != "tight") {
        throw InvalidArgument("unknown bias_mode '" + mode + "'");
    }
    const auto output = config.path(config.get<std::string>("output", "compiled.edcnn.json"));
    std::string report_name = output.filename().string();
    if (const auto pos = report_name.find(".edcnn.json"); pos != std::string::npos) report_name.erase(pos);
    const auto report_path =
        config.has("report") ? config.path(config.require<std::string>("report")) : output.parent_path() / (report_name + ".report.json");

    json report;
    int status = 0;
    try {
        const CompiledNetwork compiled = compile_dfcn(net, s, options);
        write_file(output, serialize(compiled.network));
        json blocks = json::array();
        for (const auto& b : compiled.blocks) blocks.push_back(report_json(b));
        report = {{"network", report_json(compiled.report)}, {"blocks", blocks}, {"output", output.string()}};
    } catch (const CompileError& e) {
        report = {{"network", report_json(e.report())}, {"error", e.what()}};
        status = 2;
    }
    report["version"] = version_string();
    report["s"] = s;
    report["options"] = {{"probes", options.probes}, {"seed", options.seed}, {"tolerance", options.tolerance}, {"bias_mode", mode}};
    write_file(report_path, report.dump(2) + "\n");
    out << report.dump(2) << "\n";
    return status;
}

int run_eval(const Config& config, std::ostream& out) {
    if (!config.has("network")) throw InvalidArgument("config is missing 'network'");
    const std::string text = read_file(config.path(config.require<std::string>("network")));
    const json doc = parse_json(text, "network");
    const bool is_dfcn = doc.is_object() && doc.value("format", "") == "dfcn";
    std::function<double(std::span<const double>)> f;
    std::size_t d = 0;
    std::optional<PooledEDCNN> edcnn;
    std::optional<DFCN> dfcn;
    if (is_dfcn) {
        dfcn = dfcn_from_json(doc);
        d = dfcn->input_dim();
        f = [&](std::span<const double> x) { return dfcn->evaluate(x); };
    } else {
        edcnn = edcnn_from_json(doc);
        d = edcnn->input_dim();
        f = [&](std::span<const double> x) { return edcnn->evaluate(x); };
    }

    std::vector<Vector> inputs;
    if (config.has("inputs")) {
        for (const auto& row : config.body.at("inputs")) inputs.push_back(vector_from_json(row, "inputs"));
    } else if (config.has("grid")) {
        if (d != 1) throw InvalidArgument("'grid' evaluation needs d = 1; give 'inputs' instead");
        const auto n = config.require<std::size_t>("grid");
        if (n == 0) throw InvalidArgument("'grid' must be positive");
        for (std::size_t i = 0; i < n; ++i) inputs.push_back({(i + 0.5) / static_cast<double>(n)});
    } else {
        throw InvalidArgument("config needs 'inputs' or 'grid'");
    }
    const double M = config.get("M", 0.0);
    std::optional<SmoothTarget> target;
    if (config.has("target")) target = find_target(config.require<std::string>("target"), d);

    json values = json::array();
    double sup = 0.0, sq = 0.0;
    for (const auto& x : inputs) {
        if (x.size() != d) throw DimensionError("input of dimension " + std::to_string(x.size()) + ", network expects " + std::to_string(d));
        double y = f(x);
        if (M > 0.0) y = truncate(y, M);
        values.push_back(y);
        if (target) {
            const double e = y - (*target)(x);
            sup = std::max(sup, std::abs(e));
            sq += e * e;
        }
    }
    json doc_out{{"version", version_string()}, {"count", inputs.size()}, {"values", values}};
    if (target) {
        doc_out["target"] = target->id;
        doc_out["sup_error"] = sup;
        doc_out["mean_squared_error"] = sq / static_cast<double>(inputs.size());
    }
    emit(config, doc_out, out);
    return 0;
}

PooledEDCNN random_pooled_network(std::mt19937_64& rng, std::size_t d, std::size_t s, std::size_t depth) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0), bias(-0.5, 0.5), unit(0.0, 1.0);
    std::vector<ConvLayer> layers;
    std::size_t width = d;
    for (std::size_t l = 0; l < depth; ++l) {
        Vector w(s + 1);
        for (double& x : w) x = coef(rng);
        width += s;
        Vector b(width);
        for (double& x : b) x = bias(rng);
        std::size_t pool = 1;
        if (unit(rng) < 0.3 && width >= 4) pool = 2;
        layers.push_back({Filter(std::move(w)), std::move(b), pool});
        width /= pool;
    }
    Vector a(width);
    for (double& x : a) x = coef(rng);
    return PooledEDCNN(d, s, std::move(layers), std::move(a));
}

int run_gradcheck(const Config& config, std::ostream& out) {
    const auto count = config.get<std::size_t>("count", 50);
    const auto max_depth = config.get<std::size_t>("max_depth", 6);
    const auto max_samples = config.get<std::size_t>("max_samples", 32);
    const auto max_d = config.get<std::size_t>("max_d", 3);
    const auto s = config.get<std::size_t>("s", 2);
    const auto seed = config.get<std::uint64_t>("seed", 1);
    const double tolerance = config.get("tolerance", 1e-4);
    const double step = config.get("step", 1e-6);
    const double margin = config.get("kink_margin", 1e-4);
    if (count == 0 || max_depth == 0 || max_samples == 0 || max_d == 0 || s == 0) {
        throw InvalidArgument("gradcheck sizes must be positive");
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    json cases = json::array();
    double worst = 0.0;
    std::size_t skipped = 0;
    while (cases.size() < count) {
        const std::size_t d = 1 + rng() % max_d;
        const auto net = random_pooled_network(rng, d, s, 1 + rng() % max_depth);
        const std::size_t m = 1 + rng() % max_samples;
        Matrix X(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = unit(rng);
        Vector y(m);
        for (double& t : y) t = 2.0 * unit(rng) - 1.0;
        const Dataset data(std::move(X), std::move(y), 1.0);
        if (kink_margin(net, data) < margin) {
            ++skipped;
            continue;
        }
        const auto check = check_gradient(net, data, step);
        worst = std::max(worst, check.max_relative_error);
        cases.push_back({{"d", d}, {"depth", net.depth()}, {"m", m}, {"params", param_count(net)},
                         {"max_relative_error", check.max_relative_error}});
    }
    const bool ok = worst <= tolerance;
    emit(config,
         {{"version", version_string()},
          {"seed", seed},
          {"tolerance", tolerance},
          {"max_relative_error", worst},
          {"kink_adjacent_skipped", skipped},
          {"cases", cases},
          {"status", ok ? "ok" : "gradient mismatch"}},
         out);
    return ok ? 0 : 2;
}

int run_experiment(const Config& config, const std::string& kind, std::size_t jobs, std::ostream& out) {
    ExperimentConfig exp = experiment_from_json(config.body, kind);
    if (jobs > 0) exp.jobs = jobs;
    const SmoothTarget target = find_target(exp.target, exp.d);
    const RateTable table = kind == "approx-rate" ? approx_rate_run(target, exp) : learn_rate_run(target, exp);
    json manifest = run_manifest(exp, table);
    json summary{{"medians", medians_by_scale(table)}, {"scales", table.scales()}};
    if (table.scales().size() >= 3) {
        try {
            const SlopeFit fit = slope_fit(table);
            summary["slope"] = fit.slope;
            summary["r2"] = fit.r2;
        } catch (const InvalidArgument& e) {
            summary["slope_error"] = e.what();
        }
    }
    manifest["summary"] = summary;
    if (!exp.output.empty()) {
        const fs::path prefix = config.path(exp.output);
        write_file(prefix.string() + ".csv", to_csv(table));
        write_file(prefix.string() + ".manifest.json", manifest.dump(2) + "\n");
    } else {
        out << to_csv(table);
    }
    out << summary.dump() << "\n";
    return 0;
}

int run_report(const Config& config, std::ostream& out) {
    const RateTable table = rate_table_from_csv(read_file(config.path(config.require<std::string>("table"))));
    const SlopeFit fit = slope_fit(table);
    json medians = json::array();
    const auto scales = table.scales();
    const auto meds = medians_by_scale(table);
    for (std::size_t i = 0; i < scales.size(); ++i) medians.push_back({{"scale", scales[i]}, {"median", meds[i]}});
    emit(config,
         {{"version", version_string()},
          {"slope", fit.slope},
          {"intercept", fit.intercept},
          {"r2", fit.r2},
          {"points", fit.points},
          {"medians", medians},
          {"warnings", fit.warnings}},
         out);
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pooled expansive deep CNN toolkit", "edcnn"};
    app.require_subcommand(1);
    std::size_t jobs = 0;
    bool deterministic = false;
    app.add_option("--jobs", jobs, "Concurrent sweep cells / restarts");
    app.add_flag("--deterministic", deterministic, "Run everything sequentially");
    app.set_version_flag("--version", version_string());

    struct Command {
        const char* name;
        const char* help;
    };
    const Command commands[] = {
        {"factorize", "Factor a filter into length-s filters"},
        {"compile", "Compile a DFCN into a pooled eDCNN"},
        {"eval", "Evaluate a stored network"},
        {"gradcheck", "Check gradients against finite differences"},
        {"approx-rate", "Approximation error versus depth"},
        {"learn-rate", "Excess risk versus sample size"},
        {"report", "Slope summary of a rate table"},
    };
    std::string config_path;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "JSON config file")->required();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }
    if (deterministic) jobs = 1;
    const std::string name = app.get_subcommands().front()->get_name();

    try {
        const Config config = load_config(config_path);
        if (name == "factorize") return run_factorize(config, out);
        if (name == "compile") return run_compile(config, out);
        if (name == "eval") return run_eval(config, out);
        if (name == "gradcheck") return run_gradcheck(config, out);
        if (name == "approx-rate" || name == "learn-rate") return run_experiment(config, name, jobs, out);
        return run_report(config, out);
    } catch (const FileError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        err << "invalid input: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace edcnn
