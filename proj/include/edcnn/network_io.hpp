#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

#include "edcnn/network.hpp"

namespace edcnn {

// Model files (.edcnn.json):
//   {"format": "edcnn", "s": 2, "d": 2,
//    "layers": [{"filter": ["1", ...], "bias": ["0.5", ...], "pool": 1}, ...],
//    "output": ["0.25", ...]}
// Reals are written as shortest round-trip decimal strings so a reload is bit-exact. Readers
// also accept plain JSON numbers.
//
// DFCN files:
//   {"format": "dfcn", "d": 2, "layers": [{"W": [[...], ...], "theta": [...]}], "output": [...]}

std::string format_real(double x);

nlohmann::json to_json(const PooledEDCNN& net);
nlohmann::json to_json(const DFCN& net);
nlohmann::json to_json(const Filter& f);

PooledEDCNN edcnn_from_json(const nlohmann::json& j);
DFCN dfcn_from_json(const nlohmann::json& j);
Vector vector_from_json(const nlohmann::json& j, std::string_view what);

/// Throws ParseError (with byte position for syntax errors) on malformed payloads and the
/// network's StructuralError when the payload describes an inconsistent network.
std::string serialize(const PooledEDCNN& net);
PooledEDCNN deserialize(std::string_view payload);

std::string serialize(const DFCN& net);
DFCN deserialize_dfcn(std::string_view payload);

}  // namespace edcnn
