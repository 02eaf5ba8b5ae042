#include "mfscale/metrics.hpp"

#include "mfscale/csv.hpp"
#include "mfscale/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mfscale {

Eigen::VectorXd nearest_neighbor_interpolate(const Eigen::VectorXd& sy, const Eigen::VectorXd& sf,
                                             const Eigen::VectorXd& ty) {
  if (sy.size() == 0) throw ContractError("nearest_neighbor_interpolate: empty source mesh");
  if (sf.size() != sy.size()) throw ContractError("nearest_neighbor_interpolate: field/mesh size mismatch");
  if (!sy.allFinite() || !ty.allFinite()) throw ContractError("nearest_neighbor_interpolate: non-finite coordinate");
  for (Eigen::Index i = 1; i < sy.size(); ++i)
    if (sy[i] < sy[i - 1]) throw ContractError("nearest_neighbor_interpolate: source mesh not ascending");
  Eigen::VectorXd out(ty.size());
  const double* begin = sy.data();
  const double* end = begin + sy.size();
  for (Eigen::Index j = 0; j < ty.size(); ++j) {
    auto hi = static_cast<Eigen::Index>(std::lower_bound(begin, end, ty[j]) - begin);
    Eigen::Index best;
    if (hi == 0)
      best = 0;
    else if (hi == sy.size())
      best = hi - 1;
    else
      best = (ty[j] - sy[hi - 1] <= sy[hi] - ty[j]) ? hi - 1 : hi;
    // equal coordinates: pick the first of the run
    while (best > 0 && sy[best - 1] == sy[best]) --best;
    out[j] = sf[best];
  }
  return out;
}

Eigen::VectorXd nearest_neighbor_interpolate(const Mesh& source, const Eigen::VectorXd& field, const Mesh& target) {
  return nearest_neighbor_interpolate(source.node_y, field, target.node_y);
}

double nmae(const Eigen::VectorXd& lf, const Eigen::VectorXd& hf) {
  if (lf.size() != hf.size()) throw ContractError("nmae: length mismatch");
  const double den = hf.cwiseAbs().sum();
  if (!(den > 0.0)) throw DomainError("nmae: reference field is all zeros");
  return (lf - hf).cwiseAbs().sum() / den;
}

double normalized_mse(const Eigen::VectorXd& p, const Eigen::VectorXd& r, const FieldStats& s) {
  if (p.size() != r.size()) throw ContractError("normalized_mse: length mismatch");
  if (p.size() == 0) throw ContractError("normalized_mse: empty fields");
  const Eigen::ArrayXd zp = (p.array() - s.mean) / s.std;
  const Eigen::ArrayXd zr = (r.array() - s.mean) / s.std;
  return (zp - zr).square().mean();
}

FieldErrorReport evaluate_model(const TrainedModel& model, const SamplePool& test) {
  if (test.size() == 0) throw ContractError("evaluate_model: empty test pool");
  const FieldStats su{model.field_out.mean[0], model.field_out.std[0]};
  const FieldStats st{model.scalar_out.mean[0], model.scalar_out.std[0]};
  FieldErrorReport rep;
  double eu = 0.0, et = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& ref = test.high_solutions[i];
    auto pred = predict(model, ref.flow_case, ref.mesh);
    eu += normalized_mse(pred.u, ref.u, su);
    Eigen::VectorXd pt(1), rt(1);
    pt[0] = pred.tau_w;
    rt[0] = ref.tau_w;
    et += normalized_mse(pt, rt, st);
  }
  rep.n_test_samples = test.size();
  rep.mse_u = eu / static_cast<double>(test.size());
  rep.mse_tau = et / static_cast<double>(test.size());
  return rep;
}

FidelityGapReport fidelity_gap_report(const SamplePool& pool, const std::optional<std::vector<int>>& case_ids) {
  std::vector<std::size_t> idx;
  if (case_ids) {
    for (int id : *case_ids) {
      auto i = pool.index_of(id);
      if (i < 0) throw ContractError("fidelity_gap_report: case_id " + std::to_string(id) + " not in pool");
      idx.push_back(static_cast<std::size_t>(i));
    }
    std::sort(idx.begin(), idx.end());
  } else {
    for (std::size_t i = 0; i < pool.size(); ++i) idx.push_back(i);
  }
  FidelityGapReport rep;
  double su = 0.0, st = 0.0;
  std::size_t nu = 0, nt = 0;
  for (auto i : idx) {
    const auto& lo = pool.low_solutions[i];
    const auto& hi = pool.high_solutions[i];
    try {
      su += nmae(nearest_neighbor_interpolate(lo.mesh, lo.u, hi.mesh), hi.u);
      ++nu;
    } catch (const DomainError&) {
      ++rep.excluded_u;
    }
    try {
      Eigen::VectorXd l(1), h(1);
      l[0] = lo.tau_w;
      h[0] = hi.tau_w;
      st += nmae(l, h);
      ++nt;
    } catch (const DomainError&) {
      ++rep.excluded_tau;
    }
  }
  rep.n_pairs = idx.size();
  rep.nmae_u = nu ? su / static_cast<double>(nu) : 0.0;
  rep.nmae_tau = nt ? st / static_cast<double>(nt) : 0.0;
  return rep;
}

std::string field_error_csv(const FieldErrorReport& r) {
  std::string n = std::to_string(r.n_test_samples);
  return "field,normalized_mse,n_test_samples\nu," + format_double(r.mse_u) + "," + n + "\ntau_w," +
         format_double(r.mse_tau) + "," + n + "\n";
}

std::string fidelity_gap_csv(const FidelityGapReport& r) {
  std::string n = std::to_string(r.n_pairs);
  return "field,mean_nmae,n_pairs,n_excluded\nu," + format_double(r.nmae_u) + "," + n + "," +
         std::to_string(r.excluded_u) + "\ntau_w," + format_double(r.nmae_tau) + "," + n + "," +
         std::to_string(r.excluded_tau) + "\n";
}

}  // namespace mfscale
