#include "edcnn/network_io.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "edcnn/errors.hpp"

namespace edcnn {

using nlohmann::json;

namespace {

double real_from_json(const json& j, std::string_view what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& text = j.get_ref<const std::string&>();
        double value = 0.0;
        const char* end = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(text.data(), end, value);
        if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
            throw ParseError(std::string(what) + ": invalid real '" + text + "'");
        }
        return value;
    }
    throw ParseError(std::string(what) + ": expected a real, got " + j.type_name());
}

json real_array(std::span<const double> v) {
    json arr = json::array();
    for (double x : v) arr.push_back(format_real(x));
    return arr;
}

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
    return j.at(key);
}

std::size_t size_field(const json& j, const char* key) {
    const json& v = field(j, key);
    if (!v.is_number_unsigned()) throw ParseError(std::string("field '") + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

json parse_payload(std::string_view payload) {
    try {
        return json::parse(payload.begin(), payload.end());
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
}

void check_format(const json& j, const char* expected) {
    if (j.is_object() && j.contains("format")) {
        const json& f = j.at("format");
        if (!f.is_string() || f.get<std::string>() != expected) {
            throw ParseError(std::string("expected format '") + expected + "'");
        }
    }
}

}  // namespace

std::string format_real(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw InvalidArgument("format_real: conversion failed");
    return std::string(buf, ptr);
}

Vector vector_from_json(const json& j, std::string_view what) {
    if (!j.is_array()) throw ParseError(std::string(what) + ": expected an array");
    Vector out;
    out.reserve(j.size());
    for (const auto& x : j) out.push_back(real_from_json(x, what));
    return out;
}

json to_json(const Filter& f) { return real_array(f.coeffs()); }

json to_json(const PooledEDCNN& net) {
    json layers = json::array();
    for (const auto& layer : net.layers()) {
        layers.push_back({{"filter", to_json(layer.filter)}, {"bias", real_array(layer.bias)}, {"pool", layer.pool}});
    }
    return {{"format", "edcnn"},
            {"s", net.filter_length()},
            {"d", net.input_dim()},
            {"layers", std::move(layers)},
            {"output", real_array(net.output_weights())}};
}

json to_json(const DFCN& net) {
    json layers = json::array();
    for (const auto& layer : net.layers()) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            Vector row(static_cast<std::size_t>(layer.weights.cols()));
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) row[static_cast<std::size_t>(c)] = layer.weights(r, c);
            rows.push_back(real_array(row));
        }
        layers.push_back({{"W", std::move(rows)}, {"theta", real_array(layer.bias)}});
    }
    return {{"format", "dfcn"},
            {"d", net.input_dim()},
            {"layers", std::move(layers)},
            {"output", real_array(net.output_weights())}};
}

PooledEDCNN edcnn_from_json(const json& j) {
    check_format(j, "edcnn");
    const std::size_t s = size_field(j, "s");
    const std::size_t d = size_field(j, "d");
    const json& layers_json = field(j, "layers");
    if (!layers_json.is_array()) throw ParseError("'layers' must be an array");
    std::vector<ConvLayer> layers;
    for (const auto& lj : layers_json) {
        ConvLayer layer;
        Vector coeffs = vector_from_json(field(lj, "filter"), "filter");
        if (coeffs.empty()) throw ParseError("filter: empty coefficient list");
        layer.filter = Filter(std::move(coeffs));
        layer.bias = vector_from_json(field(lj, "bias"), "bias");
        layer.pool = lj.contains("pool") ? size_field(lj, "pool") : 1;
        layers.push_back(std::move(layer));
    }
    return PooledEDCNN(d, s, std::move(layers), vector_from_json(field(j, "output"), "output"));
}

DFCN dfcn_from_json(const json& j) {
    check_format(j, "dfcn");
    const std::size_t d = size_field(j, "d");
    const json& layers_json = field(j, "layers");
    if (!layers_json.is_array()) throw ParseError("'layers' must be an array");
    std::vector<AffineLayer> layers;
    for (const auto& lj : layers_json) {
        const json& rows = field(lj, "W");
        if (!rows.is_array() || rows.empty()) throw ParseError("W: expected a non-empty array of rows");
        std::vector<Vector> parsed;
        for (const auto& r : rows) parsed.push_back(vector_from_json(r, "W row"));
        const std::size_t cols = parsed.front().size();
        Matrix w(static_cast<Eigen::Index>(parsed.size()), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < parsed.size(); ++r) {
            if (parsed[r].size() != cols) throw ParseError("W: ragged rows");
            for (std::size_t c = 0; c < cols; ++c) {
                w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parsed[r][c];
            }
        }
        layers.push_back({std::move(w), vector_from_json(field(lj, "theta"), "theta")});
    }
    return DFCN(d, std::move(layers), vector_from_json(field(j, "output"), "output"));
}

std::string serialize(const PooledEDCNN& net) { return to_json(net).dump(); }

PooledEDCNN deserialize(std::string_view payload) { return edcnn_from_json(parse_payload(payload)); }

std::string serialize(const DFCN& net) { return to_json(net).dump(); }

DFCN deserialize_dfcn(std::string_view payload) { return dfcn_from_json(parse_payload(payload)); }

}  // namespace edcnn
