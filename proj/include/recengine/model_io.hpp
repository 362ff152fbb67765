#pragma once

#include <string>

#include "recengine/models.hpp"

namespace rec {

// Versioned model container: 8-byte magic "RECMDL01", a little-endian u32
// header length, a JSON header (kind, feature layout, embedder recipe,
// training configs, id lists, training metadata), then all floating-point
// parameter blocks concatenated as little-endian float64 in a fixed order:
// standardizer mean, standardizer stdev, perceptron weights, factorization
// author embeddings, factorization site embeddings. Round-trips bitwise.
void write_model_file(const std::string& path, const ScorerModel& model);
ScorerModel read_model_file(const std::string& path);

} // namespace rec
