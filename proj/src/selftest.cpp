#include "awrb/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "awrb/greedy.hpp"
#include "awrb/index.hpp"
#include "awrb/problems.hpp"
#include "awrb/rb.hpp"
#include "awrb/wavelet.hpp"

namespace awrb {

bool SelftestReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const SelftestCheck& c) { return c.passed; });
}

namespace {

using Clock = std::chrono::steady_clock;

class Runner {
 public:
  explicit Runner(const SelftestOptions& o) : opt_(o) {}

  bool wanted(const std::string& suite) const {
    return opt_.suites.empty() || std::find(opt_.suites.begin(), opt_.suites.end(), suite) != opt_.suites.end();
  }

  // Records value <= tol as a pass.
  template <class F>
  void check(const std::string& suite, const std::string& name, double tol, F&& f) {
    SelftestCheck c;
    c.suite = suite;
    c.name = name;
    c.tolerance = tol;
    const auto t0 = Clock::now();
    try {
      c.value = f(c.detail);
      c.passed = c.value <= tol;
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = std::string("exception: ") + e.what();
      c.value = INFINITY;
    }
    c.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (opt_.on_check) opt_.on_check(c);
    report.checks.push_back(std::move(c));
  }

  SelftestReport report;
  const SelftestOptions& opt_;
};

UnivariateBasisSpec bspline_spec(Boundary b, double s = 0.0) {
  UnivariateBasisSpec u;
  u.family = Family::BiorthoBSpline;
  u.boundary = b;
  u.s = s;
  return u;
}

const Boundary kBoundaries[] = {Boundary::DirichletHomog, Boundary::Free, Boundary::Periodic};

// ---------------------------------------------------------------------------

void wavelet_suite(Runner& R) {
  R.check("wavelet", "biorthogonality of primal and cascaded dual functions", 1e-10, [](std::string& d) {
    double worst = 0.0;
    for (auto b : kBoundaries) {
      UnivariateBasis B(bspline_spec(b));
      const int J = 3, n = B.size_upto(J);
      const double h = B.mesh(J + 6);
      for (int p = 0; p < n; ++p) {
        const auto dual = dual_samples(B, B.at_position(p), J);
        for (int q = 0; q < n; ++q) {
          const auto idx = B.at_position(q);
          double s = 0.0;
          for (std::size_t i = 0; i < dual.size(); ++i)
            s += h * dual[i] * B.eval(idx, B.node_of_slot(static_cast<int>(i)) * h);
          worst = std::max(worst, std::abs(s - (p == q ? 1.0 : 0.0)));
        }
      }
    }
    d = "max |<psi_p, dual_q> - delta_pq>| over three boundary types, J = 3";
    return worst;
  });
  R.check("wavelet", "two vanishing moments", 1e-12, [](std::string& d) {
    double worst = 0.0;
    for (auto b : kBoundaries) {
      UnivariateBasis B(bspline_spec(b));
      for (int j = 1; j <= 6; ++j)
        for (int k = 0; k < B.count(j); ++k)
          for (int r = 0; r < 2; ++r)
            worst = std::max(worst, std::abs(B.vanishing_moment({j, k, Kind::Wavelet}, r)));
    }
    d = "max |int x^r psi| for r = 0, 1 and levels 1..6";
    return worst;
  });
  R.check("wavelet", "Riesz constants settle with the level", 0.05, [](std::string& d) {
    double worst = 0.0;
    for (auto b : kBoundaries)
      for (double s : {0.0, 1.0}) {
        const auto [c, C] = riesz_constants(bspline_spec(b, s), 9);
        const auto [c2, C2] = riesz_constants(bspline_spec(b, s), 11);
        if (!(c > 0.0) || c > C) return static_cast<double>(INFINITY);
        worst = std::max({worst, std::abs(c2 - c) / c, std::abs(C2 - C) / C});
      }
    d = "relative change of (c, C) from J = 9 to J = 11, L2 and H1 scalings";
    return worst;
  });
  R.check("wavelet", "multiwavelets are orthonormal", 1e-10, [](std::string& d) {
    UnivariateBasisSpec sp;
    sp.family = Family::OrthonormalMultiwavelet;
    sp.boundary = Boundary::Free;
    const auto [c, C] = riesz_constants(sp, 4);
    d = "|c - 1| and |C - 1| at J = 4";
    return std::max(std::abs(c - 1.0), std::abs(C - 1.0));
  });
}

// ---------------------------------------------------------------------------

IndexSet random_set(const Universe& u, std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<std::size_t> pick(0, u.size() - 1);
  std::vector<TensorIndex> v;
  for (int i = 0; i < n; ++i) v.push_back(u.index(pick(rng)));
  return IndexSet(std::move(v));
}

void multitree_suite(Runner& R, std::uint64_t seed) {
  const auto spec = thermal_block({4, 4});
  const Universe u(spec.op.trial.basis, {4, 4});
  const TensorBasis& B = spec.op.trial.basis;
  R.check("multitree", "completion is a multitree, extensive and idempotent", 0.0, [&](std::string& d) {
    std::mt19937_64 rng(seed);
    double failures = 0;
    for (int t = 0; t < 20; ++t) {
      const IndexSet A = random_set(u, rng, 25);
      const IndexSet cA = multitree_completion(A, B);
      if (!is_multitree(cA, B)) ++failures;
      if (!A.subset_of(cA)) ++failures;
      if (!(multitree_completion(cA, B) == cA)) ++failures;
    }
    d = "failures over 20 random sets";
    return failures;
  });
  R.check("multitree", "completion is monotone and unions of multitrees are multitrees", 0.0, [&](std::string& d) {
    std::mt19937_64 rng(seed + 1);
    double failures = 0;
    for (int t = 0; t < 20; ++t) {
      const IndexSet A = random_set(u, rng, 15), Bs = random_set(u, rng, 15);
      const IndexSet cA = multitree_completion(A, B), cB = multitree_completion(Bs, B);
      if (!cA.subset_of(multitree_completion(set_union(A, Bs), B))) ++failures;
      if (!is_multitree(set_union(cA, cB), B)) ++failures;
    }
    d = "failures over 20 random pairs";
    return failures;
  });
  R.check("multitree", "mask completion agrees with the sparse completion", 0.0, [&](std::string& d) {
    std::mt19937_64 rng(seed + 2);
    Discretization disc(spec.op, spec.rhs, spec.box, {4, 4});
    double failures = 0;
    for (int t = 0; t < 10; ++t) {
      const IndexSet A = random_set(disc.trial(), rng, 20);
      ActiveSet s(disc.trial(), A);
      complete(s, disc.tables());
      if (!(s.to_index_set() == multitree_completion(A, B))) ++failures;
    }
    d = "failures over 10 random sets";
    return failures;
  });
}

// ---------------------------------------------------------------------------

ParameterPoint random_mu(const ParameterBox& box, std::mt19937_64& rng) {
  ParameterPoint mu;
  for (std::size_t i = 0; i < box.lo.size(); ++i) {
    std::uniform_real_distribution<double> U(box.lo[i], box.hi[i]);
    mu.push_back(U(rng));
  }
  return mu;
}

ParameterPoint random_thermal_mu(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(std::log(0.01), std::log(10.0));
  std::uniform_int_distribution<int> K(1, 9);
  return {std::exp(U(rng)), static_cast<double>(K(rng))};
}

void affine_suite(Runner& R, std::uint64_t seed) {
  struct Case {
    ProblemSpec spec;
    bool thermal;
  };
  std::vector<Case> cases{{thermal_block({3, 3}), true}, {cdr_spacetime({3, 3}, false), false}};
  for (auto& cs : cases) {
    const Discretization D(cs.spec.op, cs.spec.rhs, cs.spec.box, cs.spec.levels);
    const std::string tag = " (" + cs.spec.name + ")";
    R.check("affine", "operator equals the theta combination of its components" + tag, 1e-13, [&](std::string& d) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> N01;
      double worst = 0.0;
      for (int t = 0; t < 5; ++t) {
        const auto mu = cs.thermal ? random_thermal_mu(rng) : random_mu(cs.spec.box, rng);
        const auto th = D.theta_b(mu);
        std::vector<double> x(D.trial().size());
        for (auto& v : x) v = N01(rng);
        const auto y = D.grid().apply(th, x);
        std::vector<double> z(y.size(), 0.0);
        for (std::size_t q = 0; q < th.size(); ++q) {
          std::vector<double> e(th.size(), 0.0);
          e[q] = 1.0;
          axpy(th[q], D.grid().apply(e, x), z);
        }
        axpy(-1.0, y, z);
        worst = std::max(worst, norm2(z) / norm2(y));
      }
      d = "relative difference over 5 random parameters";
      return worst;
    });
    R.check("affine", "grid application equals entrywise integration" + tag, 1e-11, [&](std::string& d) {
      std::mt19937_64 rng(seed + 1);
      std::uniform_int_distribution<std::size_t> col(0, D.trial().size() - 1), row(0, D.test().size() - 1);
      const auto mu = cs.thermal ? random_thermal_mu(rng) : random_mu(cs.spec.box, rng);
      const auto th = D.theta_b(mu);
      double worst = 0.0, scale = 0.0;
      for (int t = 0; t < 8; ++t) {
        const std::size_t c = col(rng);
        std::vector<double> e(D.trial().size(), 0.0);
        e[c] = 1.0;
        const auto y = D.grid().apply(th, e);
        for (int s = 0; s < 8; ++s) {
          const std::size_t r = s == 0 ? c % D.test().size() : row(rng);
          double ref = 0.0;
          for (std::size_t q = 0; q < th.size(); ++q)
            ref += th[q] * entry(cs.spec.op.components[q], cs.spec.op.trial, cs.spec.op.test, D.test().index(r),
                                 D.trial().index(c));
          worst = std::max(worst, std::abs(ref - y[r]));
          scale = std::max(scale, std::abs(ref));
        }
      }
      d = "max entry deviation relative to the largest entry, 64 entries";
      return worst / std::max(scale, 1e-300);
    });
    R.check("affine", "grid loads equal entrywise loads" + tag, 1e-11, [&](std::string& d) {
      std::mt19937_64 rng(seed + 2);
      std::uniform_int_distribution<std::size_t> row(0, D.test().size() - 1);
      double worst = 0.0, scale = 0.0;
      for (std::size_t p = 0; p < cs.spec.rhs.size(); ++p) {
        for (double v : D.loads()[p]) scale = std::max(scale, std::abs(v));
        for (int t = 0; t < 10; ++t) {
          const std::size_t r = row(rng);
          const TensorIndex idx = D.test().index(r);
          const double ref =
              assemble_rhs(cs.spec.rhs.components[p], cs.spec.op.test, IndexSet(std::vector<TensorIndex>{idx})).get(idx);
          worst = std::max(worst, std::abs(ref - D.loads()[p][r]));
        }
      }
      d = "max load deviation relative to the largest load entry";
      return worst / std::max(scale, 1e-300);
    });
  }
}

// ---------------------------------------------------------------------------

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

Eigen::VectorXd ev(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void offline_online_suite(Runner& R, std::uint64_t seed) {
  struct Case {
    ProblemSpec spec;
    bool thermal;
  };
  std::vector<Case> cases{{thermal_block({3, 3}), true}, {cdr_spacetime({3, 3}, false), false}};
  for (auto& cs : cases) {
    ProblemInstance P(cs.spec);
    const std::string tag = " (" + cs.spec.name + ")";
    std::mt19937_64 rng(seed);
    ReducedSpace S(P, 1e-8, true, false);
    AwgmConfig cfg;
    cfg.L_max = cs.spec.levels;
    cfg.riesz_lower = P.riesz().c;
    for (int i = 0; i < 4; ++i) {
      const auto mu = cs.thermal ? random_thermal_mu(rng) : random_mu(cs.spec.box, rng);
      S.add_snapshot(solve(P.fine(), mu, 1e-5, cs.spec.measure, cfg));
    }
    // Supremizer components to a tolerance far below the comparison threshold.
    double gmax = 0.0;
    for (auto& c : S.gramians().columns()) gmax = std::max(gmax, norm2(c));
    S.compute_test_components(1e-12 * gmax, cfg);
    const ReducedModel& m = S.model();

    // Dense fine-space oracles.
    const Eigen::MatrixXd G = dense_operator(P.gramian().grid(), P.gramian().theta_b({}));
    const Eigen::LLT<Eigen::MatrixXd> Gllt(G);
    Eigen::MatrixXd Z(P.fine().trial().size(), static_cast<Eigen::Index>(S.size()));
    for (std::size_t i = 0; i < S.size(); ++i) Z.col(static_cast<Eigen::Index>(i)) = ev(S.basis()[i]);

    std::vector<ParameterPoint> mus;
    for (int t = 0; t < 10; ++t) mus.push_back(cs.thermal ? random_thermal_mu(rng) : random_mu(cs.spec.box, rng));

    R.check("offline-online", "Galerkin reduced solve equals the projected fine solve" + tag, 1e-10,
            [&](std::string& d) {
              double worst = 0.0;
              for (auto& mu : mus) {
                const Eigen::MatrixXd A = dense_operator(P.rb_operator().grid(), P.rb_operator().theta_b(mu));
                const Eigen::VectorXd f = ev(P.rb_operator().rhs(mu));
                const Eigen::VectorXd u = (Z.transpose() * A * Z).lu().solve(Z.transpose() * f);
                worst = std::max(worst, rel(ev(reduced_solve(m, mu, RbSolver::Galerkin).u), u));
              }
              d = "relative coefficient difference, 10 parameters, N = 4";
              return worst;
            });
    R.check("offline-online", "Petrov-Galerkin reduced solve equals the fine supremizer solve" + tag, 1e-10,
            [&](std::string& d) {
              double worst = 0.0;
              for (auto& mu : mus) {
                const Eigen::MatrixXd B = dense_operator(P.fine().grid(), P.fine().theta_b(mu));
                const Eigen::VectorXd f = ev(P.fine().rhs(mu));
                const Eigen::MatrixXd BZ = B * Z;
                const Eigen::MatrixXd eta = Gllt.solve(BZ);
                const Eigen::VectorXd u = (eta.transpose() * BZ).lu().solve(eta.transpose() * f);
                worst = std::max(worst, rel(ev(reduced_solve(m, mu, RbSolver::PetrovSupremizer).u), u));
              }
              d = "relative coefficient difference, 10 parameters, N = 4";
              return worst;
            });
    R.check("offline-online", "normal-equation reduced solve equals the dense least-squares minimizer" + tag, 1e-10,
            [&](std::string& d) {
              double worst = 0.0;
              for (auto& mu : mus) {
                const Eigen::MatrixXd B = dense_operator(P.fine().grid(), P.fine().theta_b(mu));
                const Eigen::VectorXd f = ev(P.fine().rhs(mu));
                const Eigen::VectorXd u = (B * Z).colPivHouseholderQr().solve(f);
                worst = std::max(worst, rel(ev(reduced_solve(m, mu, RbSolver::NormalEq).u), u));
              }
              d = "relative coefficient difference, 10 parameters, N = 4";
              return worst;
            });
    R.check("offline-online", "Gramian residual norm equals the fine residual norm" + tag, 1e-10,
            [&](std::string& d) {
              double worst = 0.0;
              for (auto& mu : mus) {
                const Eigen::MatrixXd B = dense_operator(P.fine().grid(), P.fine().theta_b(mu));
                const Eigen::VectorXd f = ev(P.fine().rhs(mu));
                const auto uN = reduced_solve(m, mu, RbSolver::Galerkin).u;
                const double fine = (f - B * Z * ev(uN)).norm();
                const double off = residual_l2(m.theta_f(mu), m.theta_b(mu), uN, m.gram);
                // Cancellation in the Gramian form limits accuracy relative to |f|.
                worst = std::max(worst, std::abs(fine - off) / f.norm());
              }
              d = "|fine - Gramian| / |f|, 10 parameters";
              return worst;
            });
    R.check("offline-online", "supremizer components solve their Riesz equations" + tag, 1e-12, [&](std::string& d) {
      double worst = 0.0;
      const auto& cols = S.gramians().columns();
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const Eigen::VectorXd r = G * ev(S.eta()[c]) - ev(cols[c]);
        worst = std::max(worst, r.norm() / gmax);
      }
      d = "max |G eta - b_q(zeta_i, .)| / max |b_q(zeta_i, .)|";
      return worst;
    });
  }
}

}  // namespace

SelftestReport run_selftest(const SelftestOptions& opt) {
  Runner R(opt);
  const auto t0 = Clock::now();
  if (R.wanted("wavelet")) wavelet_suite(R);
  if (R.wanted("multitree")) multitree_suite(R, opt.seed);
  if (R.wanted("affine")) affine_suite(R, opt.seed);
  if (R.wanted("offline-online")) offline_online_suite(R, opt.seed);
  R.report.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return R.report;
}

}  // namespace awrb
