#pragma once

#include "koopbound/bounds.hpp"
#include "koopbound/kernels.hpp"
#include "koopbound/matrix_analysis.hpp"
#include "koopbound/network.hpp"
#include "koopbound/rademacher.hpp"

#include <json.hpp>

namespace koopbound {

using Json = nlohmann::json;

// Matrices travel as {"rows": r, "cols": c, "data": [row-major reals]}.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

void to_json(Json& j, const ActivationSpec& a);
void from_json(const Json& j, ActivationSpec& a);

void to_json(Json& j, const WeightClassSpec& c);
void from_json(const Json& j, WeightClassSpec& c);

void to_json(Json& j, const ScalarKernelSpec& k);
void from_json(const Json& j, ScalarKernelSpec& k);

void to_json(Json& j, const MultiTaskKernelConfig& c);
void from_json(const Json& j, MultiTaskKernelConfig& c);

void to_json(Json& j, const FinalMapSpec& f);
void from_json(const Json& j, FinalMapSpec& f);

void to_json(Json& j, const NetworkSpec& n);
void from_json(const Json& j, NetworkSpec& n);

void to_json(Json& j, const LayerFactor& f);
void to_json(Json& j, const BoundReport& r);

void to_json(Json& j, const EstimatorConfig& c);
void from_json(const Json& j, EstimatorConfig& c);

void to_json(Json& j, const RademacherEstimate& e);

}  // namespace koopbound
