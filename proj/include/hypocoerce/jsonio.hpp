// JSON import/export for geometries, models and reports, plus the config
// hashing used in output-file headers.  Polynomial terms serialize as
// {exponents, num, den} records in graded-lexicographic order.
#pragma once

#include "hypocoerce/lattice.hpp"

#include "json.hpp"

namespace hypo {

using nlohmann::json;

json poly_to_json(const Poly& p);
Poly poly_from_json(const json& j, int n_vars);

json field_to_json(const VectorField& f);
VectorField field_from_json(const json& j);

// {name, N, m, n, Z, D, lambda, c}; c as 1-based {k, j, l, num, den} records.
json geometry_to_json(const Geometry& g);
Geometry geometry_from_json(const json& j);

json mat_to_json(const Mat& m);
Mat mat_from_json(const json& j);

// model file: {geometry: name-or-record, beta, G?, alpha?: {preset, amplitudes}}
json model_to_json(const ModelSpec& m);
ModelSpec model_from_json(const json& j);

json to_json(const EstimatorResult& r);
json to_json(const BoundCheck& c);
json to_json(const KappaReport& r);
json to_json(const PointwiseKappa& r);
json to_json(const LqReport& r);
json to_json(const LyapunovReport& r);
json to_json(const ExpMomentReport& r);
json to_json(const LatticeConstants& c);
json to_json(const SpeedReport& r);
json to_json(const CauchyReport& r);
json to_json(const ErgodicityReport& r);
json to_json(const OmegaReport& r);

// FNV-1a of the canonical (sorted-key, compact) dump; hex string.
std::string config_hash(const json& config);

} // namespace hypo
