#include "lngram/gradcheck.hpp"

#include <algorithm>
#include <random>

#include "lngram/lngram_layer.hpp"

namespace lngram {

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double surrogate_case(const GradcheckConfig& cfg, std::mt19937_64& rng) {
  const int K = 1 << cfg.bits;
  const Eigen::VectorXd z = gaussian(cfg.bits, 1, 1.0, rng);
  const Eigen::VectorXd g = gaussian(cfg.mem_dim, 1, 1.0, rng);
  const Matrix<double> E = gaussian(K, cfg.mem_dim, 1.0, rng);
  const Eigen::VectorXd analytic = exact_surrogate_grad<double>(z, cfg.temperature, g, E);
  const Eigen::VectorXd numeric = finite_difference_grad(
      [&](const Eigen::VectorXd& x) { return g.dot(expected_retrieval<double>(x, cfg.temperature, E)); }, z,
      cfg.step);
  return vector_relative_error(analytic, numeric);
}

double onebit_case(const GradcheckConfig& cfg, std::mt19937_64& rng) {
  Eigen::VectorXd z(1);
  z(0) = gaussian(1, 1, 1.0, rng)(0, 0);
  const Eigen::VectorXd g = gaussian(cfg.mem_dim, 1, 1.0, rng);
  const Matrix<double> E = gaussian(2, cfg.mem_dim, 1.0, rng);
  const Eigen::VectorXd exact = exact_surrogate_grad<double>(z, cfg.temperature, g, E);
  const Eigen::VectorXd onebit =
      onebit_surrogate_grad<double>(z, cfg.temperature, 1.0, g, E.topRows(1), E.bottomRows(1));
  return (exact - onebit).cwiseAbs().maxCoeff();
}

// <G, lngram_forward(H)> against lngram_backward for the exactly differentiable parameters.
double main_path(const GradcheckConfig& cfg, std::mt19937_64& rng) {
  LngramConfig lc;
  lc.dim = 8;
  lc.bits = 2;
  lc.orders = {2, 3};
  lc.mem_dim = 3;
  lc.table_init_std = 0.5;
  lc.readout_init_std = 0.5;
  double worst = 0.0;
  for (FusionMode mode : {FusionMode::single_table, FusionMode::multi_table}) {
    lc.mode = mode;
    lc.subtables = mode == FusionMode::single_table ? 1 : 2;
    LngramParams<double> params = make_lngram_params<double>(lc, rng);
    params.readout.conv_kernels = gaussian(lc.dim, lc.conv_width, 0.5, rng);
    for (auto& b : params.readout.key_bias) b = gaussian(1, lc.dim, 0.3, rng);
    for (auto& b : params.readout.value_bias) b = gaussian(1, lc.dim, 0.3, rng);
    const int T = 7;
    const Matrix<double> H = gaussian(2 * T, lc.dim, 1.0, rng);
    const Matrix<double> G = gaussian(2 * T, lc.dim, 1.0, rng);
    LngramCache<double> cache;
    lngram_forward(H, params, lc, T, &cache);
    LngramParams<double> grads = zeros_like(params);
    lngram_backward(cache, params, lc, G, grads, RoutingGradient::none);
    auto loss = [&]() { return (lngram_forward(H, params, lc, T).array() * G.array()).sum(); };
    auto check = [&](Matrix<double>& p, const Matrix<double>& analytic) {
      Matrix<double> numeric(p.rows(), p.cols());
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double keep = p.data()[i];
        p.data()[i] = keep + cfg.step;
        const double up = loss();
        p.data()[i] = keep - cfg.step;
        const double down = loss();
        p.data()[i] = keep;
        numeric.data()[i] = (up - down) / (2.0 * cfg.step);
      }
      worst = std::max(worst, vector_relative_error(numeric, analytic));
    };
    for (std::size_t s = 0; s < params.bank.groups.size(); ++s) {
      for (std::size_t k = 0; k < params.bank.groups[s].size(); ++k) {
        check(params.bank.groups[s][k].entries, grads.bank.groups[s][k].entries);
      }
    }
    for (std::size_t i = 0; i < params.readout.key_proj.size(); ++i) {
      check(params.readout.key_proj[i], grads.readout.key_proj[i]);
      check(params.readout.value_proj[i], grads.readout.value_proj[i]);
      check(params.readout.key_bias[i], grads.readout.key_bias[i]);
      check(params.readout.value_bias[i], grads.readout.value_bias[i]);
    }
    check(params.readout.conv_kernels, grads.readout.conv_kernels);
  }
  return worst;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckConfig& config) {
  if (config.cases < 1) throw ConfigError("gradcheck: cases must be >= 1");
  if (config.bits < 1 || config.bits > kMaxBitsPerRoute) throw ConfigError("gradcheck: bits out of range");
  if (config.mem_dim < 1) throw ConfigError("gradcheck: mem dim must be >= 1");
  if (!(config.step > 0) || !(config.temperature > 0)) throw ConfigError("gradcheck: step and temperature > 0");
  std::mt19937_64 rng(config.seed);
  GradcheckReport r;
  r.cases = config.cases;
  for (int c = 0; c < config.cases; ++c) r.surrogate_max_rel = std::max(r.surrogate_max_rel, surrogate_case(config, rng));
  for (int c = 0; c < config.cases; ++c) r.onebit_max_abs = std::max(r.onebit_max_abs, onebit_case(config, rng));
  r.main_path_max_rel = main_path(config, rng);
  return r;
}

}  // namespace lngram
