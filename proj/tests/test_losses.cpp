#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "e2c_oracle.hpp"
#include "mse2c/losses.hpp"
#include "test_util.hpp"

using namespace mse2c;
using test_util::fd_grad_mat;
using test_util::fd_grad_vec;
using test_util::random_tiny_model;
using test_util::random_trajectory;
using test_util::tiny_model_config;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

TrajectoryNoise<double> random_noise(Rng& rng, int d, int k) {
  TrajectoryNoise<double> noise;
  noise.xi0 = rng.normal_vector<double>(d);
  for (int j = 0; j < k; ++j) noise.xi.push_back(rng.normal_vector<double>(d));
  return noise;
}

// Shift diagonals until every Gershgorin row value is non-positive; the
// extra margin absorbs summation rounding so the hinge is exactly zero.
MatrixXd project_to_zero_gershgorin(MatrixXd x, double eps) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double row = x(i, i) + eps;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (j != i) row += std::abs(x(i, j));
    if (row > -1e-9) x(i, i) -= row + 1e-9;
  }
  return x;
}

}  // namespace

TEST_CASE("gershgorin loss closed-form values") {
  CHECK(gershgorin_loss<double>(MatrixXd::Identity(2, 2), 0.01) == doctest::Approx(2.02));
  CHECK(gershgorin_loss<double>(-MatrixXd::Identity(2, 2), 0.01) == 0.0);
  MatrixXd x(2, 2);
  x << -2.0, 1.0, 0.5, -3.0;
  CHECK(gershgorin_loss<double>(x, 0.1) == 0.0);
  CHECK_THROWS_AS((void)gershgorin_loss<double>(MatrixXd::Zero(2, 3), 0.01), ValidationError);
}

TEST_CASE("zero gershgorin loss forces negative eigenvalue real parts") {
  Rng rng(101);
  const double eps = 0.05;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform_int(8));
    const MatrixXd x = project_to_zero_gershgorin(2.0 * rng.normal_matrix<double>(d, d), eps);
    REQUIRE(gershgorin_loss<double>(x, eps) == 0.0);
    Eigen::EigenSolver<MatrixXd> eig(x);
    CHECK(eig.eigenvalues().real().maxCoeff() <= -eps + 1e-9);
  }
}

TEST_CASE("gershgorin loss is convex") {
  Rng rng(102);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform_int(5));
    const MatrixXd x = rng.normal_matrix<double>(d, d);
    const MatrixXd y = rng.normal_matrix<double>(d, d);
    const double eps = rng.uniform(0.0, 0.2);
    const double mid = gershgorin_loss<double>(MatrixXd(0.5 * (x + y)), eps);
    CHECK(mid <= 0.5 * gershgorin_loss<double>(x, eps) + 0.5 * gershgorin_loss<double>(y, eps) +
                     1e-12);
  }
}

TEST_CASE("gershgorin subgradient matches finite differences away from kinks") {
  Rng rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform_int(4));
    const MatrixXd x = rng.normal_matrix<double>(d, d);
    const double eps = 0.01;
    const MatrixXd analytic = gershgorin_grad(x, eps);
    const MatrixXd fd =
        fd_grad_mat([&](const MatrixXd& m) { return gershgorin_loss<double>(m, eps); }, x);
    CHECK((analytic - fd).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("stability loss adds the two penalties and validates shape") {
  LocalLinearization<double> lin;
  lin.a = -MatrixXd::Identity(2, 2);
  lin.b = -MatrixXd::Identity(2, 2);
  lin.o = VectorXd::Zero(2);
  CHECK(stability_loss(lin, 0.01) == 0.0);

  lin.a = MatrixXd::Identity(2, 2);
  CHECK(stability_loss(lin, 0.01) == doctest::Approx(2.02));

  lin.b = MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS((void)stability_loss(lin, 0.01), ValidationError);
}

TEST_CASE("projected matrices have zero stability loss and stable spectra") {
  Rng rng(104);
  const double eps = 0.02;
  for (int trial = 0; trial < 50; ++trial) {
    LocalLinearization<double> lin;
    lin.a = project_to_zero_gershgorin(rng.normal_matrix<double>(3, 3), eps);
    lin.b = project_to_zero_gershgorin(rng.normal_matrix<double>(3, 3), eps);
    lin.o = rng.normal_vector<double>(3);
    CHECK(stability_loss(lin, eps) == 0.0);
    Eigen::EigenSolver<MatrixXd> eig(lin.a);
    CHECK(eig.eigenvalues().real().maxCoeff() < 0.0);
  }
}

TEST_CASE("consistency loss vanishes when predictions equal encodings") {
  // constant encoder N(mu*, I), constant dynamics landing exactly on it
  ModelConfig mc = tiny_model_config(DynamicsVariant::GlobalLinear, 2, 2, 2);
  mc.hidden_encoder.clear();
  mc.hidden_dynamics.clear();
  mc.hidden_decoder.clear();
  mc.sigma_w2 = 1.0;
  auto model = init_model<double>(mc, 1);
  model.phi().setZero();
  const VectorXd mu_star = (VectorXd(2) << 0.37, -1.2).finished();
  model.phi().tail(4).head(2) = mu_star;  // encoder bias: mean rows
  model.psi().setZero();
  model.psi().tail(2) = mu_star;  // offset o = mu*, A = 0, B = 0

  Rng rng(105);
  const TrajectorySample sample = random_trajectory(rng, 4, 3);
  const double c = consistency_loss(sample, model, VectorXd(rng.normal_vector<double>(2)));
  CHECK(c == 0.0);
}

TEST_CASE("consistency loss with one step is a single kl call") {
  const auto model =
      random_tiny_model(tiny_model_config(DynamicsVariant::LocalLinear, 2, 2, 2), 31);
  Rng rng(106);
  const TrajectorySample sample = random_trajectory(rng, 4, 1);
  const VectorXd xi0 = rng.normal_vector<double>(2);

  const Gaussian<double> q0 = encode(VectorXd(sample.frames[0].cast<double>()), model.enc);
  const VectorXd z = reparam_sample(q0, xi0);
  const auto seq = predict_sequence(z, q0.cov, {VectorXd(sample.actions[0])}, model.dyn);
  const Gaussian<double> q1 = encode(VectorXd(sample.frames[1].cast<double>()), model.enc);
  CHECK(consistency_loss(sample, model, xi0) ==
        doctest::Approx(kl_divergence(seq[0], q1)).epsilon(1e-12));
}

TEST_CASE("consistency loss matches a hand-computed value for d=1, k=2") {
  ModelConfig mc;
  mc.image_width = 2;
  mc.latent_dim = 1;
  mc.action_dim = 2;
  mc.hidden_encoder.clear();
  mc.hidden_dynamics.clear();
  mc.hidden_decoder.clear();
  mc.variant = DynamicsVariant::LocalLinear;
  mc.sigma_w2 = 0.04;
  auto model = init_model<double>(mc, 1);

  // encoder: mean = w_m . x + b_m, logvar = w_v . x + b_v
  VectorXd phi(10);
  phi << 0.1, -0.2, 0.05, 0.3,   // W rows: mean row then logvar row (col-major 2x4)
      0.02, -0.1, 0.04, 0.2,     // continued columns
      0.15, -0.3;                // biases
  model.phi() = phi;
  // dynamics: raw = Wd * z + bd with raw = (a, b1, b2, o)
  VecX<double> psi(8);
  psi << 0.4, -0.3, 0.2, 0.6, -0.5, 0.1, 0.25, -0.15;  // W (4x1) then b (4)
  model.psi() = psi;

  Rng rng(107);
  const TrajectorySample sample = random_trajectory(rng, 4, 2);
  const double xi0 = 0.7;

  // hand computation with plain doubles
  const auto enc_scalar = [&](const Image& img, double& mean, double& logvar) {
    const VectorXd x = img.cast<double>();
    mean = phi[0] * x[0] + phi[2] * x[1] + phi[4] * x[2] + phi[6] * x[3] + phi[8];
    logvar = phi[1] * x[0] + phi[3] * x[1] + phi[5] * x[2] + phi[7] * x[3] + phi[9];
  };
  double mu0, lv0;
  enc_scalar(sample.frames[0], mu0, lv0);
  const double z = mu0 + std::exp(0.5 * lv0) * xi0;
  const double a = psi[0] * z + psi[4];
  const double b1 = psi[1] * z + psi[5];
  const double b2 = psi[2] * z + psi[6];
  const double o = psi[3] * z + psi[7];

  double m_prev = z, s_prev = std::exp(lv0);
  double expected = 0;
  for (int j = 0; j < 2; ++j) {
    const double mj = a * m_prev + b1 * sample.actions[j].x() + b2 * sample.actions[j].y() + o;
    const double sj = a * s_prev * a + 0.04;
    double mu_e, lv_e;
    enc_scalar(sample.frames[j + 1], mu_e, lv_e);
    const double v = std::exp(lv_e);
    expected += 0.5 * ((sj + (mj - mu_e) * (mj - mu_e)) / v - 1.0 + lv_e - std::log(sj));
    m_prev = mj;
    s_prev = sj;
  }

  const double actual =
      consistency_loss(sample, model, VectorXd(VectorXd::Constant(1, xi0)));
  CHECK(actual == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("upper bound kl term vanishes for a standard-normal encoder") {
  ModelConfig mc = tiny_model_config(DynamicsVariant::LocalLinear, 2, 2, 2);
  mc.hidden_encoder.clear();
  auto model = random_tiny_model(mc, 32);
  model.phi().setZero();  // encoder outputs N(0, I) for every image

  Rng rng(108);
  const TrajectorySample sample = random_trajectory(rng, 4, 2);
  const auto noise = random_noise(rng, 2, 2);
  const auto [upper, diag] = upper_bound_loss(sample, model, noise);
  CHECK(diag.kl_prior == 0.0);
  CHECK(upper == doctest::Approx(diag.reconstruction_terms.sum()));
}

TEST_CASE("upper bound matches a fully hand-computed one-pixel instance") {
  ModelConfig mc;
  mc.image_width = 1;
  mc.latent_dim = 1;
  mc.action_dim = 2;
  mc.hidden_encoder.clear();
  mc.hidden_dynamics.clear();
  mc.hidden_decoder.clear();
  mc.variant = DynamicsVariant::LocalLinear;
  mc.sigma_w2 = 0.25;
  auto model = init_model<double>(mc, 1);
  model.phi() << 0.8, -0.4, 0.1, 0.3;       // mean = .8 x + .1, logvar = -.4 x + .3
  model.psi() << 0.5, -0.2, 0.3, 0.1, -0.6, 0.2, -0.1, 0.4;
  model.theta() << 1.1, -0.2;               // logit = 1.1 z - .2

  TrajectorySample sample;
  sample.frames = {Image::Constant(1, 1), Image::Constant(1, 0)};
  sample.actions = {Eigen::Vector2d(0.5, -1.0)};
  TrajectoryNoise<double> noise;
  noise.xi0 = VectorXd::Constant(1, 0.9);
  noise.xi = {VectorXd::Constant(1, -1.3)};

  // encoder at x = 1
  const double mu = 0.8 * 1 + 0.1, lv = -0.4 * 1 + 0.3;
  const double z = mu + std::exp(0.5 * lv) * 0.9;
  // dynamics at z: raw = W z + b with raw = (a, b1, b2, o)
  const double a = 0.5 * z - 0.6, b1 = -0.2 * z + 0.2, b2 = 0.3 * z - 0.1, o = 0.1 * z + 0.4;
  const double m1 = a * z + b1 * 0.5 + b2 * (-1.0) + o;
  const double s1 = a * std::exp(lv) * a + 0.25;
  const double zhat = m1 + std::sqrt(s1) * (-1.3);
  const auto sigmoid = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
  const double p0 = sigmoid(1.1 * z - 0.2);
  const double p1 = sigmoid(1.1 * zhat - 0.2);
  const double recon0 = -std::log(p0);        // target 1
  const double recon1 = -std::log(1.0 - p1);  // target 0
  const double klp = 0.5 * (std::exp(lv) + mu * mu - 1.0 - lv);
  const double expected = recon0 + recon1 + klp;

  const auto [upper, diag] = upper_bound_loss(sample, model, noise);
  CHECK(upper == doctest::Approx(expected).epsilon(1e-12));
  CHECK(diag.kl_prior == doctest::Approx(klp).epsilon(1e-12));
}

TEST_CASE("single-step losses equal the straight-line reference") {
  Rng rng(109);
  for (int trial = 0; trial < 100; ++trial) {
    const auto model = random_tiny_model(
        tiny_model_config(DynamicsVariant::LocalLinear, 2, 2, 2), 200 + trial);
    const TrajectorySample sample = random_trajectory(rng, 4, 1);
    const auto noise = random_noise(rng, 2, 1);
    const LossWeights<double> w{1.0, 1.0, 0.01};

    const auto breakdown = composite_losses(sample, model, w, noise);
    const auto ref = e2c_oracle::reference(sample, model, noise, w.epsilon);
    CHECK(test_util::rel_err(breakdown.upper, ref.upper) <= 1e-10);
    CHECK(test_util::rel_err(breakdown.consistency, ref.consistency) <= 1e-10);
    CHECK(test_util::rel_err(breakdown.stability, ref.stability) <= 1e-10);
  }
}

TEST_CASE("batched engine agrees with the single-sample operations") {
  Rng rng(110);
  for (auto variant : {DynamicsVariant::LocalLinear, DynamicsVariant::GlobalLinear,
                       DynamicsVariant::NonLinear}) {
    const bool linearized = variant != DynamicsVariant::NonLinear;
    const auto model = random_tiny_model(tiny_model_config(variant, 2, 2, 2), 41);
    const TrajectorySample sample = random_trajectory(rng, 4, 3);
    const auto noise = random_noise(rng, 2, 3);
    const LossWeights<double> w{0.7, linearized ? 0.3 : 0.0, 0.02};

    const auto breakdown = composite_losses(sample, model, w, noise);
    const auto [upper, diag] = upper_bound_loss(sample, model, noise);
    const double consistency = consistency_loss(sample, model, noise.xi0);
    CHECK(test_util::rel_err(breakdown.upper, upper) <= 1e-10);
    CHECK(test_util::rel_err(breakdown.consistency, consistency) <= 1e-10);
    CHECK(test_util::vec_rel_err(breakdown.reconstruction_terms, diag.reconstruction_terms) <=
          1e-10);
    CHECK(test_util::rel_err(breakdown.kl_prior, diag.kl_prior) <= 1e-10);

    if (linearized) {
      const Gaussian<double> q0 =
          encode(VectorXd(sample.frames[0].cast<double>()), model.enc);
      const VectorXd z = reparam_sample(q0, noise.xi0);
      const double stab = stability_loss(linearize(z, model.dyn), w.epsilon);
      CHECK(test_util::rel_err(breakdown.stability, stab) <= 1e-10);
    } else {
      CHECK(breakdown.stability == 0.0);
    }
    CHECK(breakdown.composite_phi_psi ==
          doctest::Approx(breakdown.upper + w.lambda1 * breakdown.consistency +
                          w.lambda2 * breakdown.stability));
    CHECK(breakdown.composite_theta == breakdown.upper);
  }
}

TEST_CASE("composite collapses to the upper bound when both weights vanish") {
  const auto model =
      random_tiny_model(tiny_model_config(DynamicsVariant::LocalLinear, 2, 2, 2), 42);
  Rng rng(111);
  const TrajectorySample sample = random_trajectory(rng, 4, 2);
  const auto noise = random_noise(rng, 2, 2);
  const auto breakdown = composite_losses(sample, model, {0.0, 0.0, 0.01}, noise);
  CHECK(breakdown.composite_phi_psi == breakdown.upper);
}

TEST_CASE("upper bound with fixed noise is bit-level repeatable") {
  const auto model =
      random_tiny_model(tiny_model_config(DynamicsVariant::LocalLinear, 2, 2, 2), 43);
  Rng rng(112);
  const TrajectorySample sample = random_trajectory(rng, 4, 4);
  const auto noise = random_noise(rng, 2, 4);
  const auto [u1, d1] = upper_bound_loss(sample, model, noise);
  const auto [u2, d2] = upper_bound_loss(sample, model, noise);
  CHECK(u1 == u2);
  CHECK((d1.reconstruction_terms - d2.reconstruction_terms).norm() == 0.0);
}

TEST_CASE("loss breakdown invariants hold under fuzzing") {
  Rng rng(113);
  for (int trial = 0; trial < 50; ++trial) {
    const auto variant = trial % 2 == 0 ? DynamicsVariant::LocalLinear
                                        : DynamicsVariant::GlobalLinear;
    const auto model = random_tiny_model(tiny_model_config(variant, 2, 2, 2), 300 + trial);
    const int k = 1 + static_cast<int>(rng.uniform_int(4));
    const TrajectorySample sample = random_trajectory(rng, 4, k);
    const auto noise = random_noise(rng, 2, k);
    const auto b = composite_losses(sample, model, {0.9, 0.2, 0.01}, noise);
    CHECK(b.kl_prior >= -1e-9);
    CHECK(b.stability >= 0.0);
    CHECK(b.consistency >= -1e-9);
    CHECK(b.composite_phi_psi ==
          doctest::Approx(b.upper + 0.9 * b.consistency + 0.2 * b.stability));
  }
}

TEST_CASE("full composite gradient matches finite differences for every variant") {
  Rng rng(114);
  for (auto variant : {DynamicsVariant::LocalLinear, DynamicsVariant::GlobalLinear,
                       DynamicsVariant::NonLinear}) {
    const bool linearized = variant != DynamicsVariant::NonLinear;
    auto model = random_tiny_model(tiny_model_config(variant, 2, 2, 2), 51);
    const LossWeights<double> w{0.8, linearized ? 0.3 : 0.0, 0.02};

    // batch of two to exercise the batched accumulation
    Batch<double> batch;
    const TrajectorySample s1 = random_trajectory(rng, 4, 3);
    const TrajectorySample s2 = random_trajectory(rng, 4, 3);
    batch.frames.resize(4);
    batch.actions.resize(3);
    for (int j = 0; j <= 3; ++j) {
      batch.frames[j].resize(4, 2);
      batch.frames[j].col(0) = s1.frames[j].cast<double>();
      batch.frames[j].col(1) = s2.frames[j].cast<double>();
    }
    for (int j = 0; j < 3; ++j) {
      batch.actions[j].resize(2, 2);
      batch.actions[j].col(0) = s1.actions[j];
      batch.actions[j].col(1) = s2.actions[j];
    }
    NoiseBatch<double> noise;
    noise.xi0 = rng.normal_matrix<double>(2, 2);
    for (int j = 0; j < 3; ++j) noise.xi.push_back(rng.normal_matrix<double>(2, 2));

    ParamGrads<double> grads;
    composite_losses_batch<double>(batch, model, w, noise, &grads);

    const auto probe_composite = [&](VecX<double>& slot, const VectorXd& p) {
      const VectorXd saved = slot;
      slot = p;
      const double v = composite_losses_batch<double>(batch, model, w, noise, nullptr).composite_phi_psi;
      slot = saved;
      return v;
    };

    REQUIRE(model.phi().size() + model.psi().size() + model.theta().size() < 1000);
    const VectorXd fd_phi = fd_grad_vec(
        [&](const VectorXd& p) { return probe_composite(model.phi(), p); }, model.phi());
    CHECK((grads.phi - fd_phi).norm() / std::max(1e-9, fd_phi.norm()) <= 1e-4);

    const VectorXd fd_psi = fd_grad_vec(
        [&](const VectorXd& p) { return probe_composite(model.psi(), p); }, model.psi());
    CHECK((grads.psi - fd_psi).norm() / std::max(1e-9, fd_psi.norm()) <= 1e-4);

    // theta receives only the upper-bound path; verify against both readings
    const auto probe_theta = [&](const VectorXd& p) {
      const VectorXd saved = model.theta();
      model.theta() = p;
      const double v = composite_losses_batch<double>(batch, model, w, noise, nullptr).composite_theta;
      model.theta() = saved;
      return v;
    };
    const VectorXd fd_theta = fd_grad_vec(probe_theta, model.theta());
    CHECK((grads.theta - fd_theta).norm() / std::max(1e-9, fd_theta.norm()) <= 1e-4);
    const VectorXd fd_theta_composite = fd_grad_vec(
        [&](const VectorXd& p) { return probe_composite(model.theta(), p); }, model.theta());
    CHECK((grads.theta - fd_theta_composite).norm() / std::max(1e-9, fd_theta_composite.norm()) <=
          1e-4);
  }
}

TEST_CASE("stability configuration errors are rejected up front") {
  const auto nl_model =
      random_tiny_model(tiny_model_config(DynamicsVariant::NonLinear, 2, 2, 2), 61);
  Rng rng(115);
  const TrajectorySample sample = random_trajectory(rng, 4, 1);
  const auto noise = random_noise(rng, 2, 1);
  CHECK_THROWS_AS((void)composite_losses(sample, nl_model, {1.0, 0.5, 0.01}, noise),
                  ValidationError);

  const auto rect_model =
      random_tiny_model(tiny_model_config(DynamicsVariant::LocalLinear, 2, 3, 2), 62);
  TrajectoryNoise<double> noise3;
  noise3.xi0 = rng.normal_vector<double>(3);
  noise3.xi = {rng.normal_vector<double>(3)};
  CHECK_THROWS_AS((void)composite_losses(sample, rect_model, {1.0, 0.5, 0.01}, noise3),
                  ValidationError);
}
