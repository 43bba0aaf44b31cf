#pragma once

#include "misfit/simulation.hpp"

#include <json.hpp>

#include <iosfwd>

namespace misfit {

/// Insertion-ordered so reports list fields in a stable, readable order.
using Json = nlohmann::ordered_json;

/// Non-finite entries become null.
Json to_json(double value);
Json to_json(const Vector& v);
/// Array of rows.
Json to_json(const Matrix& m);

Json to_json(const FitConfig& config);
Json to_json(const FitResult& fit);
Json to_json(const CovarianceReport& report);
Json to_json(const LeastFalseResult& result);
Json to_json(const GofReport& report);
Json to_json(const CovariateDistribution& H);
Json to_json(const TrueModel& truth);
Json to_json(const WeightSpec& weight);
Json to_json(const KernelSpec& spec);
Json to_json(const EstimatorSpec& spec);
/// Full resolved configuration, defaults included.
Json to_json(const Scenario& scenario);
Json to_json(const ReplicationSummary& summary);

/// Fit plus standard errors and Wald intervals of both flavors at `level`.
/// Without convergence the covariance part is omitted.
Json fit_report(Link link, const FitResult& fit, const Dataset& data, double level);

/// Columns: replication, estimator, beta_0..beta_d, converged, flags. Estimates
/// of the density-ratio estimator are listed as q_0.. in their own columns.
void write_replication_csv(std::ostream& out, const ReplicationSummary& summary);

/// Columns: x_1..x_d, q_star, beta_0..beta_d, ok, error.
void write_local_curve_csv(std::ostream& out, const std::vector<LocalCurvePoint>& curve);

/// Shortest text that reads back as the same double.
std::string format_double(double value);

}  // namespace misfit
