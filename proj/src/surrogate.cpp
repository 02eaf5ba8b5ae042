#include "mfscale/surrogate.hpp"

#include "mfscale/errors.hpp"
#include "mfscale/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <tuple>

namespace mfscale {

std::string_view to_string(Activation a) { return a == Activation::Gelu ? "gelu" : "relu"; }

Activation parse_activation(std::string_view s) {
  if (s == "gelu" || s == "GELU") return Activation::Gelu;
  if (s == "relu" || s == "ReLU") return Activation::Relu;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

void validate(const NetworkConfig& c) {
  if (c.field_hidden.empty() || c.scalar_hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  for (auto w : c.field_hidden)
    if (w <= 0) throw ConfigError("hidden widths must be positive");
  for (auto w : c.scalar_hidden)
    if (w <= 0) throw ConfigError("hidden widths must be positive");
}

void validate(const TrainConfig& c) {
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.epochs > 0 && !(c.warmup_epochs < c.epochs)) throw ConfigError("warmup_epochs must be below epochs");
  if (c.warmup_epochs < 0 || c.early_stop_patience < 1) throw ConfigError("warmup >= 0 and patience >= 1 required");
  if (!(c.peak_lr > 0.0) || c.weight_decay < 0.0 || c.grad_clip_norm < 0.0)
    throw ConfigError("learning rate must be positive, decay and clip nonnegative");
  if (!(c.beta1 > 0.0 && c.beta1 < 1.0 && c.beta2 > 0.0 && c.beta2 < 1.0))
    throw ConfigError("Adam betas must lie in (0, 1)");
  if (c.batch_size < 1 || c.scalar_batch_size < 1 || c.nodes_per_sample < 1)
    throw ConfigError("batch sizes and nodes_per_sample must be >= 1");
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in [0, 1)");
}

double learning_rate(int epoch, const TrainConfig& c) {
  if (epoch < c.warmup_epochs) return c.peak_lr * epoch / c.warmup_epochs;
  const double span = c.epochs - c.warmup_epochs;
  if (span <= 0.0) return 0.0;
  const double p = std::min(1.0, (epoch - c.warmup_epochs) / span);
  return 0.5 * c.peak_lr * (1.0 + std::cos(std::numbers::pi * p));
}

NormalizationStats NormalizationStats::fit(const Eigen::MatrixXd& rows) {
  if (rows.cols() == 0) throw ContractError("normalization stats of an empty set");
  NormalizationStats s;
  s.mean = rows.rowwise().mean();
  s.std.resize(rows.rows());
  s.constant.assign(static_cast<std::size_t>(rows.rows()), false);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    double var = (rows.row(i).array() - s.mean[i]).square().mean();
    double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean[i])))) {
      sd = 1.0;
      s.constant[static_cast<std::size_t>(i)] = true;
    }
    s.std[i] = sd;
  }
  return s;
}

Eigen::MatrixXd NormalizationStats::normalize(const Eigen::MatrixXd& x) const {
  if (x.rows() != mean.size()) throw ContractError("normalize: feature count mismatch");
  return (x.colwise() - mean).array().colwise() / std.array();
}

Eigen::MatrixXd NormalizationStats::denormalize(const Eigen::MatrixXd& z) const {
  if (z.rows() != mean.size()) throw ContractError("denormalize: feature count mismatch");
  // constant features have no spread to restore
  Eigen::VectorXd scale = std;
  for (Eigen::Index i = 0; i < scale.size(); ++i)
    if (constant[static_cast<std::size_t>(i)]) scale[i] = 0.0;
  return (z.array().colwise() * scale.array()).matrix().colwise() + mean;
}

Eigen::MatrixXd field_features(const FlowCase& c, const Eigen::VectorXd& node_y, bool fidelity_input, bool high) {
  Eigen::MatrixXd x(fidelity_input ? 4 : 3, node_y.size());
  x.row(0) = node_y.transpose();
  x.row(1).setConstant(std::log10(c.re_delta));
  x.row(2).setConstant(c.beta_p);
  if (fidelity_input) x.row(3).setConstant(high ? 1.0 : 0.0);
  return x;
}

Eigen::VectorXd scalar_features(const FlowCase& c, bool fidelity_input, bool high) {
  Eigen::VectorXd x(fidelity_input ? 3 : 2);
  x[0] = std::log10(c.re_delta);
  x[1] = c.beta_p;
  if (fidelity_input) x[2] = high ? 1.0 : 0.0;
  return x;
}

namespace {

struct Rows {
  Eigen::MatrixXd x, y;
};

struct Item {
  int case_id;
  Fidelity fidelity;
};

Rows gather_field(const std::vector<Item>& items, const SamplePool& pool, const TrainConfig& tc, bool fid_in) {
  std::vector<Eigen::MatrixXd> xs;
  std::vector<Eigen::VectorXd> ys;
  Eigen::Index total = 0;
  for (const auto& it : items) {
    const auto& s = pool.solution(it.case_id, it.fidelity);
    const Eigen::Index n = s.u.size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    const auto k = std::min<Eigen::Index>(tc.nodes_per_sample, n);
    if (k < n) {
      Rng rng(mix_seed(mix_seed(tc.seed, 2), static_cast<std::uint64_t>(it.case_id) * 2 + (it.fidelity == Fidelity::High)));
      rng.shuffle(idx);
      idx.resize(static_cast<std::size_t>(k));
      std::sort(idx.begin(), idx.end());
    }
    Eigen::VectorXd y(k), u(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      y[j] = s.mesh.node_y[idx[static_cast<std::size_t>(j)]];
      u[j] = s.u[idx[static_cast<std::size_t>(j)]];
    }
    xs.push_back(field_features(s.flow_case, y, fid_in, it.fidelity == Fidelity::High));
    ys.push_back(u);
    total += k;
  }
  Rows r{Eigen::MatrixXd(fid_in ? 4 : 3, total), Eigen::MatrixXd(1, total)};
  Eigen::Index c = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    r.x.middleCols(c, xs[i].cols()) = xs[i];
    r.y.block(0, c, 1, ys[i].size()) = ys[i].transpose();
    c += xs[i].cols();
  }
  return r;
}

Rows gather_scalar(const std::vector<Item>& items, const SamplePool& pool, bool fid_in) {
  Rows r{Eigen::MatrixXd(fid_in ? 3 : 2, static_cast<Eigen::Index>(items.size())),
         Eigen::MatrixXd(1, static_cast<Eigen::Index>(items.size()))};
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& s = pool.solution(items[i].case_id, items[i].fidelity);
    const auto col = static_cast<Eigen::Index>(i);
    r.x.col(col) = scalar_features(s.flow_case, fid_in, items[i].fidelity == Fidelity::High);
    r.y(0, col) = s.tau_w;
  }
  return r;
}

NetReport fit_net(Mlp<float>& net, const MatrixX<float>& xt, const MatrixX<float>& yt, const MatrixX<float>& xv,
                  const MatrixX<float>& yv, const TrainConfig& tc, int batch_size, std::uint64_t seed) {
  NetReport rep;
  const bool has_val = xv.cols() > 0;
  auto val_loss = [&] { return static_cast<double>(has_val ? mse_loss(net, xv, yv) : mse_loss(net, xt, yt)); };

  Mlp<float> best = net;
  rep.best_val_loss = val_loss();
  rep.best_epoch = 0;
  AdamW<float> opt(net.n_parameters(), {tc.beta1, tc.beta2, 1e-8, tc.weight_decay});
  Mlp<float> grad = net.zeros_like();
  Rng rng(seed);
  const Eigen::Index n = xt.cols();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  MatrixX<float> xb, yb;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = learning_rate(epoch, tc);
    rng.shuffle(perm);
    for (Eigen::Index start = 0; start < n; start += batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(batch_size, n - start);
      xb.resize(xt.rows(), b);
      yb.resize(yt.rows(), b);
      for (Eigen::Index j = 0; j < b; ++j) {
        xb.col(j) = xt.col(perm[static_cast<std::size_t>(start + j)]);
        yb.col(j) = yt.col(perm[static_cast<std::size_t>(start + j)]);
      }
      loss_and_grad(net, xb, yb, grad);
      VectorX<float> g = grad.flat();
      clip_global_norm(g, tc.grad_clip_norm);
      VectorX<float> p = net.flat();
      opt.step(p, g, lr);
      net.set_flat(p);
    }
    const double v = val_loss();
    rep.val_history.push_back(v);
    rep.epochs_run = epoch + 1;
    if (v < rep.best_val_loss) {
      rep.best_val_loss = v;
      rep.best_epoch = epoch + 1;
      best = net;
    }
    if (rep.epochs_run - rep.best_epoch >= tc.early_stop_patience) break;
  }
  net = std::move(best);
  return rep;
}

}  // namespace

std::pair<Mlp<float>, Mlp<float>> initial_nets(const NetworkConfig& nc) {
  validate(nc);
  const Eigen::Index extra = nc.fidelity_input ? 1 : 0;
  std::vector<Eigen::Index> fw{3 + extra}, sw{2 + extra};
  fw.insert(fw.end(), nc.field_hidden.begin(), nc.field_hidden.end());
  sw.insert(sw.end(), nc.scalar_hidden.begin(), nc.scalar_hidden.end());
  fw.push_back(1);
  sw.push_back(1);
  return {init_mlp<float>(fw, nc.activation, mix_seed(nc.seed, 10)),
          init_mlp<float>(sw, nc.activation, mix_seed(nc.seed, 11))};
}

TrainedModel train(const Selection& selection, const SamplePool& pool, const NetworkConfig& nc,
                   const TrainConfig& tc) {
  validate(nc);
  validate(tc);
  if (selection.size() == 0) throw ContractError("train: empty selection");

  std::vector<Item> items;
  for (int id : selection.low_ids) items.push_back({id, Fidelity::Low});
  for (int id : selection.high_ids) items.push_back({id, Fidelity::High});

  // seeded validation split over samples
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(mix_seed(tc.seed, 1));
  split_rng.shuffle(order);
  std::size_t n_val = 0;
  if (items.size() >= 2 && tc.validation_fraction > 0.0)
    n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(tc.validation_fraction * static_cast<double>(items.size()))));
  std::vector<Item> val_items, train_items;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? val_items : train_items).push_back(items[order[i]]);
  std::sort(val_items.begin(), val_items.end(), [](const Item& a, const Item& b) {
    return std::pair(a.case_id, a.fidelity) < std::pair(b.case_id, b.fidelity);
  });
  std::sort(train_items.begin(), train_items.end(), [](const Item& a, const Item& b) {
    return std::pair(a.case_id, a.fidelity) < std::pair(b.case_id, b.fidelity);
  });

  const bool fid = nc.fidelity_input;
  TrainedModel m;
  m.fidelity_input = fid;
  m.no_validation = val_items.empty();

  auto ft = gather_field(train_items, pool, tc, fid);
  auto st = gather_scalar(train_items, pool, fid);
  m.field_in = NormalizationStats::fit(ft.x);
  m.field_out = NormalizationStats::fit(ft.y);
  m.scalar_in = NormalizationStats::fit(st.x);
  m.scalar_out = NormalizationStats::fit(st.y);
  m.constant_targets = m.field_out.constant[0] || m.scalar_out.constant[0];
  m.field_lo = ft.x.rowwise().minCoeff();
  m.field_hi = ft.x.rowwise().maxCoeff();
  m.scalar_lo = st.x.rowwise().minCoeff();
  m.scalar_hi = st.x.rowwise().maxCoeff();

  auto to_float = [](const Eigen::MatrixXd& a) { return MatrixX<float>(a.cast<float>()); };
  MatrixX<float> fxv(ft.x.rows(), 0), fyv(1, 0), sxv(st.x.rows(), 0), syv(1, 0);
  if (!val_items.empty()) {
    auto fv = gather_field(val_items, pool, tc, fid);
    auto sv = gather_scalar(val_items, pool, fid);
    fxv = to_float(m.field_in.normalize(fv.x));
    fyv = to_float(m.field_out.normalize(fv.y));
    sxv = to_float(m.scalar_in.normalize(sv.x));
    syv = to_float(m.scalar_out.normalize(sv.y));
  }

  std::tie(m.field_net, m.scalar_net) = initial_nets(nc);

  m.field_report = fit_net(m.field_net, to_float(m.field_in.normalize(ft.x)), to_float(m.field_out.normalize(ft.y)),
                           fxv, fyv, tc, tc.batch_size, mix_seed(tc.seed, 3));
  m.scalar_report = fit_net(m.scalar_net, to_float(m.scalar_in.normalize(st.x)),
                            to_float(m.scalar_out.normalize(st.y)), sxv, syv, tc, tc.scalar_batch_size,
                            mix_seed(tc.seed, 4));
  m.best_val_loss = m.field_report.best_val_loss + m.scalar_report.best_val_loss;
  m.epochs_run = std::max(m.field_report.epochs_run, m.scalar_report.epochs_run);
  return m;
}

Prediction predict(const TrainedModel& m, const FlowCase& c, const Mesh& q) {
  if (q.node_y.size() == 0) throw ContractError("predict: empty query mesh");
  if ((q.node_y.array() <= 0.0).any() || (q.node_y.array() > 1.0).any())
    throw ContractError("predict: query nodes must lie in (0, 1]");
  Prediction p;
  const Eigen::MatrixXd fx = field_features(c, q.node_y, m.fidelity_input, true);
  const Eigen::VectorXd sx = scalar_features(c, m.fidelity_input, true);
  auto outside = [](const Eigen::MatrixXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const double tol = 1e-12;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (x.row(i).minCoeff() < lo[i] - tol || x.row(i).maxCoeff() > hi[i] + tol) return true;
    return false;
  };
  p.extrapolated = outside(fx, m.field_lo, m.field_hi) || outside(sx, m.scalar_lo, m.scalar_hi);

  MatrixX<float> zf = m.field_in.normalize(fx).cast<float>();
  Eigen::MatrixXd of = forward(m.field_net, zf).cast<double>();
  p.u = m.field_out.denormalize(of).row(0).transpose();
  MatrixX<float> zs = m.scalar_in.normalize(sx).cast<float>();
  Eigen::MatrixXd os = forward(m.scalar_net, zs).cast<double>();
  p.tau_w = m.scalar_out.denormalize(os)(0, 0);
  return p;
}

namespace {

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

constexpr char kMagic[4] = {'M', 'F', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <typename T>
  void put(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void put_vec(const Eigen::VectorXd& v) {
    put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
    for (auto x : v) put<double>(x);
  }
  void put_stats(const NormalizationStats& s) {
    put_vec(s.mean);
    put_vec(s.std);
    for (bool c : s.constant) put<std::uint8_t>(c);
  }
  void put_net(const Mlp<float>& n) {
    put<std::uint8_t>(n.activation == Activation::Gelu ? 0 : 1);
    put<std::uint32_t>(static_cast<std::uint32_t>(n.n_layers()));
    for (std::size_t l = 0; l < n.n_layers(); ++l) {
      put<std::uint32_t>(static_cast<std::uint32_t>(n.weights[l].rows()));
      put<std::uint32_t>(static_cast<std::uint32_t>(n.weights[l].cols()));
      for (Eigen::Index i = 0; i < n.weights[l].rows(); ++i)
        for (Eigen::Index j = 0; j < n.weights[l].cols(); ++j) put<float>(n.weights[l](i, j));
      for (auto b : n.biases[l]) put<float>(b);
    }
  }
  void put_report(const NetReport& r) {
    put<double>(r.best_val_loss);
    put<std::int32_t>(r.best_epoch);
    put<std::int32_t>(r.epochs_run);
    put_vec(Eigen::Map<const Eigen::VectorXd>(r.val_history.data(), static_cast<Eigen::Index>(r.val_history.size())));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}
  template <typename T>
  T get() {
    T v;
    if (!is_.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("model file truncated");
    return v;
  }
  std::uint32_t get_size(std::uint32_t limit = 1u << 26) {
    auto n = get<std::uint32_t>();
    if (n > limit) throw std::runtime_error("model file has implausible size field");
    return n;
  }
  Eigen::VectorXd get_vec() {
    Eigen::VectorXd v(get_size());
    for (auto& x : v) x = get<double>();
    return v;
  }
  NormalizationStats get_stats() {
    NormalizationStats s;
    s.mean = get_vec();
    s.std = get_vec();
    if (s.std.size() != s.mean.size()) throw std::runtime_error("model file: stats size mismatch");
    for (Eigen::Index i = 0; i < s.mean.size(); ++i) s.constant.push_back(get<std::uint8_t>() != 0);
    return s;
  }
  Mlp<float> get_net() {
    Mlp<float> n;
    n.activation = get<std::uint8_t>() == 0 ? Activation::Gelu : Activation::Relu;
    auto layers = get_size(1024);
    for (std::uint32_t l = 0; l < layers; ++l) {
      auto r = get_size(1u << 16), c = get_size(1u << 16);
      MatrixX<float> w(r, c);
      for (std::uint32_t i = 0; i < r; ++i)
        for (std::uint32_t j = 0; j < c; ++j) w(i, j) = get<float>();
      VectorX<float> b(r);
      for (auto& x : b) x = get<float>();
      n.weights.push_back(std::move(w));
      n.biases.push_back(std::move(b));
    }
    return n;
  }
  NetReport get_report() {
    NetReport r;
    r.best_val_loss = get<double>();
    r.best_epoch = get<std::int32_t>();
    r.epochs_run = get<std::int32_t>();
    auto h = get_vec();
    r.val_history.assign(h.begin(), h.end());
    return r;
  }

 private:
  std::istream& is_;
};

}  // namespace

void save_model(const TrainedModel& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kMagic, 4);
  Writer w(os);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint8_t>(m.fidelity_input);
  w.put_net(m.field_net);
  w.put_net(m.scalar_net);
  w.put_stats(m.field_in);
  w.put_stats(m.field_out);
  w.put_stats(m.scalar_in);
  w.put_stats(m.scalar_out);
  w.put_vec(m.field_lo);
  w.put_vec(m.field_hi);
  w.put_vec(m.scalar_lo);
  w.put_vec(m.scalar_hi);
  w.put<double>(m.best_val_loss);
  w.put<std::int32_t>(m.epochs_run);
  w.put_report(m.field_report);
  w.put_report(m.scalar_report);
  w.put<std::uint8_t>(m.no_validation);
  w.put<std::uint8_t>(m.constant_targets);
  if (!os.flush()) throw std::runtime_error("write failed for " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path.string() + " is not a model file");
  Reader r(is);
  if (auto v = r.get<std::uint32_t>(); v != kVersion)
    throw std::runtime_error("unsupported model version " + std::to_string(v));
  TrainedModel m;
  m.fidelity_input = r.get<std::uint8_t>() != 0;
  m.field_net = r.get_net();
  m.scalar_net = r.get_net();
  m.field_in = r.get_stats();
  m.field_out = r.get_stats();
  m.scalar_in = r.get_stats();
  m.scalar_out = r.get_stats();
  m.field_lo = r.get_vec();
  m.field_hi = r.get_vec();
  m.scalar_lo = r.get_vec();
  m.scalar_hi = r.get_vec();
  m.best_val_loss = r.get<double>();
  m.epochs_run = r.get<std::int32_t>();
  m.field_report = r.get_report();
  m.scalar_report = r.get_report();
  m.no_validation = r.get<std::uint8_t>() != 0;
  m.constant_targets = r.get<std::uint8_t>() != 0;
  return m;
}

}  // namespace mfscale
