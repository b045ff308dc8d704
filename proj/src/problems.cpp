#include "rrmd/problems.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace rrmd {

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::PhaseRetrieval: return "phase_retrieval";
    case ProblemKind::QuadraticInverse: return "quadratic_inverse";
    case ProblemKind::PoissonInverse: return "poisson_inverse";
  }
  return "?";
}

ProblemKind problem_kind_from_string(const std::string& name) {
  if (name == "phase_retrieval") return ProblemKind::PhaseRetrieval;
  if (name == "quadratic_inverse") return ProblemKind::QuadraticInverse;
  if (name == "poisson_inverse") return ProblemKind::PoissonInverse;
  throw ConfigError("unknown problem kind: " + name);
}

void DatasetSpec::validate() const {
  if (n < 1 || d < 1) throw ConfigError("dataset spec: need n >= 1 and d >= 1");
  if (noise < 0.0) throw ConfigError("dataset spec: noise must be nonnegative");
  if (!(burg_sigma > 0.0)) throw ConfigError("dataset spec: burg_sigma must be positive");
}

double FiniteSumProblem::full_value(const Vec& x) const {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += component_value(i, x);
  return acc / static_cast<double>(n);
}

Vec FiniteSumProblem::full_grad(const Vec& x) const {
  Vec g = Vec::Zero(d);
  for (int i = 0; i < n; ++i) g += component_grad(i, x);
  return g / static_cast<double>(n);
}

namespace {

Vec random_normal_vec(RngStream& rng, int d) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.normal();
  return v;
}

struct LinearMeasurements {
  Mat a;  // n x d, rows are the measurement vectors
  Vec b;
};

}  // namespace

FiniteSumProblem make_phase_retrieval(const DatasetSpec& spec) {
  spec.validate();
  auto data = std::make_shared<LinearMeasurements>();
  RngStream truth_rng = RngStream::from_seed(spec.seed, "truth");
  RngStream data_rng = RngStream::from_seed(spec.seed, "data");
  RngStream noise_rng = RngStream::from_seed(spec.seed, "noise");

  const Vec x_true = spec.truth_scale * random_normal_vec(truth_rng, spec.d);
  data->a.resize(spec.n, spec.d);
  data->b.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.d; ++j) data->a(i, j) = data_rng.normal();
    data->b[i] = std::abs(data->a.row(i).dot(x_true)) + spec.noise * noise_rng.normal();
  }

  FiniteSumProblem p;
  p.n = spec.n;
  p.d = spec.d;
  p.kernel = std::make_shared<Kernel>(std::vector<BlockKernelPtr>{make_power(spec.d, 2.0)});
  p.component_value = [data](int i, const Vec& x) {
    const double inner = data->a.row(i).dot(x);
    const double gap = inner * inner - data->b[i] * data->b[i];
    return gap * gap;
  };
  p.component_grad = [data](int i, const Vec& x) -> Vec {
    const double inner = data->a.row(i).dot(x);
    const double gap = inner * inner - data->b[i] * data->b[i];
    return (4.0 * gap * inner) * data->a.row(i).transpose();
  };
  p.f_lower = 0.0;
  RngStream init_rng = RngStream::from_seed(spec.seed, "init");
  p.x_start = random_normal_vec(init_rng, spec.d);
  p.x_truth = x_true;
  p.name = "phase_retrieval";
  return p;
}

FiniteSumProblem make_quadratic_inverse(const DatasetSpec& spec) {
  spec.validate();
  struct QuadraticData {
    std::vector<Mat> m;
    Vec b;
  };
  auto data = std::make_shared<QuadraticData>();
  RngStream truth_rng = RngStream::from_seed(spec.seed, "truth");
  RngStream data_rng = RngStream::from_seed(spec.seed, "data");
  RngStream noise_rng = RngStream::from_seed(spec.seed, "noise");

  const Vec x_true = spec.truth_scale * random_normal_vec(truth_rng, spec.d);
  data->b.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    Mat c(spec.d, spec.d);
    for (int r = 0; r < spec.d; ++r) {
      for (int j = 0; j < spec.d; ++j) c(r, j) = data_rng.normal() / std::sqrt(spec.d);
    }
    data->m.push_back(c * c.transpose());
    data->b[i] =
        std::max(0.0, x_true.dot(data->m[i] * x_true) + spec.noise * noise_rng.normal());
  }

  FiniteSumProblem p;
  p.n = spec.n;
  p.d = spec.d;
  p.kernel = std::make_shared<Kernel>(std::vector<BlockKernelPtr>{make_power(spec.d, 2.0)});
  p.component_value = [data](int i, const Vec& x) {
    const double gap = x.dot(data->m[i] * x) - data->b[i];
    return 0.25 * gap * gap;
  };
  p.component_grad = [data](int i, const Vec& x) -> Vec {
    const Vec mx = data->m[i] * x;
    return (x.dot(mx) - data->b[i]) * mx;
  };
  p.f_lower = 0.0;
  RngStream init_rng = RngStream::from_seed(spec.seed, "init");
  p.x_start = random_normal_vec(init_rng, spec.d);
  p.x_truth = x_true;
  p.name = "quadratic_inverse";
  return p;
}

FiniteSumProblem make_poisson_inverse(const DatasetSpec& spec) {
  spec.validate();
  auto data = std::make_shared<LinearMeasurements>();
  RngStream truth_rng = RngStream::from_seed(spec.seed, "truth");
  RngStream data_rng = RngStream::from_seed(spec.seed, "data");
  RngStream noise_rng = RngStream::from_seed(spec.seed, "noise");

  Vec x_true(spec.d);
  for (int j = 0; j < spec.d; ++j) x_true[j] = truth_rng.uniform(0.0, 10.0 * spec.truth_scale);

  data->a.resize(spec.n, spec.d);
  data->b.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.d; ++j) data->a(i, j) = std::abs(data_rng.student_t(5));
    const double mean = data->a.row(i).dot(x_true);
    long draw = noise_rng.poisson(mean);
    for (int tries = 0; draw == 0 && tries < 100; ++tries) draw = noise_rng.poisson(mean);
    data->b[i] = static_cast<double>(std::max<long>(draw, 1));
  }

  FiniteSumProblem p;
  p.n = spec.n;
  p.d = spec.d;
  p.kernel = std::make_shared<Kernel>(
      std::vector<BlockKernelPtr>{make_regularized_burg(spec.d, spec.burg_sigma)});
  p.component_value = [data](int i, const Vec& x) {
    const double s = data->a.row(i).dot(x);
    if (!(s > 0.0)) throw DomainViolation("poisson component: nonpositive measurement a'x");
    return s * std::log(s / data->b[i]) - (s - data->b[i]);
  };
  p.component_grad = [data](int i, const Vec& x) -> Vec {
    const double s = data->a.row(i).dot(x);
    if (!(s > 0.0)) throw DomainViolation("poisson component: nonpositive measurement a'x");
    return std::log(s / data->b[i]) * data->a.row(i).transpose();
  };
  p.f_lower = 0.0;
  p.x_start = Vec::Constant(spec.d, 5.0 * spec.truth_scale);
  p.x_truth = x_true;
  p.name = "poisson_inverse";
  return p;
}

FiniteSumProblem make_problem(const DatasetSpec& spec) {
  switch (spec.kind) {
    case ProblemKind::PhaseRetrieval: return make_phase_retrieval(spec);
    case ProblemKind::QuadraticInverse: return make_quadratic_inverse(spec);
    case ProblemKind::PoissonInverse: return make_poisson_inverse(spec);
  }
  throw ConfigError("unreachable problem kind");
}

namespace {

// finite-difference Hessian of one component via central gradient differences
Mat fd_component_hessian(const FiniteSumProblem& p, int i, const Vec& x) {
  const double h = 1e-5 * (1.0 + x.norm());
  Mat hess(p.d, p.d);
  for (int j = 0; j < p.d; ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    hess.col(j) = (p.component_grad(i, xp) - p.component_grad(i, xm)) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace

double estimate_relative_L(const FiniteSumProblem& p, int trials, std::uint64_t seed,
                           double sample_scale) {
  RngStream rng = RngStream::from_seed(seed, "rel-L");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vec x = p.kernel->sample_interior(rng);
    x *= sample_scale;
    if (!p.kernel->contains(x)) continue;
    const int i = static_cast<int>(rng.below(p.n));
    const Mat fh = fd_component_hessian(p, i, x);
    const Mat kh = p.kernel->hessian(x);
    // top |lambda| of kh^{-1/2} fh kh^{-1/2}; random probes only lower-bound it
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> eig(fh, kh, Eigen::EigenvaluesOnly);
    worst = std::max(worst, eig.eigenvalues().cwiseAbs().maxCoeff());
    for (int probe = 0; probe < 4; ++probe) {
      const Vec v = random_normal_vec(rng, p.d);
      worst = std::max(worst, std::abs(v.dot(fh * v)) / v.dot(kh * v));
    }
  }
  return 1.5 * worst;
}

double estimate_gradient_bound(const FiniteSumProblem& p, int trials, std::uint64_t seed,
                               double dual_radius) {
  RngStream rng = RngStream::from_seed(seed, "grad-bound");
  const Vec w0 = p.kernel->mirror_map(p.x_start);
  double worst = 0.0;
  for (int i = 0; i < p.n; ++i) worst = std::max(worst, p.component_grad(i, p.x_start).norm());
  for (int t = 0; t < trials; ++t) {
    Vec u = random_normal_vec(rng, p.d);
    u *= dual_radius * rng.uniform() / u.norm();
    const Vec x = p.kernel->inverse_mirror_map(w0 + u);
    const int i = static_cast<int>(rng.below(p.n));
    worst = std::max(worst, p.component_grad(i, x).norm());
  }
  return 1.5 * worst;
}

namespace {

struct SmoothnessSample {
  double t;    // (f - f_lower)^tau
  double lhs;  // (1/n) sum ||grad f_i||^2
  Vec x;
};

std::vector<SmoothnessSample> draw_smoothness_samples(const FiniteSumProblem& p, double tau,
                                                      int samples, RngStream& rng,
                                                      double sample_scale) {
  std::vector<SmoothnessSample> out;
  out.reserve(samples);
  while (static_cast<int>(out.size()) < samples) {
    Vec x = p.kernel->sample_interior(rng);
    x *= sample_scale;
    if (!p.kernel->contains(x)) continue;
    double lhs = 0.0;
    for (int i = 0; i < p.n; ++i) lhs += p.component_grad(i, x).squaredNorm();
    lhs /= static_cast<double>(p.n);
    const double gap = std::max(0.0, p.full_value(x) - p.f_lower);
    out.push_back({std::pow(gap, tau), lhs, std::move(x)});
  }
  return out;
}

}  // namespace

SmoothnessFit fit_expected_smoothness(const FiniteSumProblem& p, double tau, int samples,
                                      std::uint64_t seed, double sample_scale) {
  RngStream rng = RngStream::from_seed(seed, "smoothness-fit");
  const auto data = draw_smoothness_samples(p, tau, samples, rng, sample_scale);

  // least squares lhs ~ A t + c with c = B^2, clamped to the nonnegative cone
  double st = 0.0, stt = 0.0, sl = 0.0, stl = 0.0;
  for (const auto& s : data) {
    st += s.t;
    stt += s.t * s.t;
    sl += s.lhs;
    stl += s.t * s.lhs;
  }
  const double nn = static_cast<double>(data.size());
  const double det = nn * stt - st * st;
  double a = 0.0, c = 0.0;
  if (std::abs(det) > 1e-12 * (1.0 + nn * stt)) {
    a = (nn * stl - st * sl) / det;
    c = (sl * stt - st * stl) / det;
  }
  if (a < 0.0) a = 0.0;
  if (c < 0.0) c = 0.0;
  if (a == 0.0 && c == 0.0) c = sl / std::max(1.0, nn);

  // inflate until the bound dominates the fitting sample
  double needed = 1.0;
  for (const auto& s : data) {
    const double rhs = a * s.t + c;
    if (rhs > 0.0) needed = std::max(needed, s.lhs / rhs);
  }
  const double inflate = 1.25 * needed;
  return {a * inflate, std::sqrt(c * inflate), tau};
}

SmoothnessReport expected_smoothness_check(const FiniteSumProblem& p, double A, double B,
                                           double tau, int samples, std::uint64_t seed,
                                           double sample_scale) {
  RngStream rng = RngStream::from_seed(seed, "smoothness-check");
  const auto data = draw_smoothness_samples(p, tau, samples, rng, sample_scale);
  SmoothnessReport report;
  for (const auto& s : data) {
    const double rhs = A * s.t + B * B;
    const double ratio = rhs > 0.0 ? s.lhs / rhs : (s.lhs > 0.0 ? 1e300 : 0.0);
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.worst_x = s.x;
    }
    if (ratio > 1.0 + 1e-8) ++report.violations;
  }
  return report;
}

void dump_dataset_csv(const DatasetSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open dataset output file: " + path);
  {
    std::ostringstream ident;
    ident << to_string(spec.kind) << "," << spec.d << "," << spec.n << "," << spec.noise << ","
          << spec.truth_scale << "," << spec.burg_sigma << "," << spec.seed;
    out << "# kind=" << to_string(spec.kind) << ",d=" << spec.d << ",n=" << spec.n
        << ",seed=" << spec.seed << ",sigma=" << spec.burg_sigma << ",config=" << std::hex
        << fnv1a64(ident.str()) << std::dec << ",version=" << kVersion << "\n";
  }
  out.precision(17);

  if (spec.kind == ProblemKind::QuadraticInverse) {
    // row i: flattened row-major M_i then b_i, regenerated with the same
    // streams as make_quadratic_inverse
    RngStream truth_rng = RngStream::from_seed(spec.seed, "truth");
    RngStream data_rng = RngStream::from_seed(spec.seed, "data");
    RngStream noise_rng = RngStream::from_seed(spec.seed, "noise");
    Vec x_true(spec.d);
    for (int j = 0; j < spec.d; ++j) x_true[j] = spec.truth_scale * truth_rng.normal();
    for (int i = 0; i < spec.n; ++i) {
      Mat c(spec.d, spec.d);
      for (int r = 0; r < spec.d; ++r) {
        for (int j = 0; j < spec.d; ++j) c(r, j) = data_rng.normal() / std::sqrt(spec.d);
      }
      const Mat m_i = c * c.transpose();
      const double b_i =
          std::max(0.0, x_true.dot(m_i * x_true) + spec.noise * noise_rng.normal());
      for (int r = 0; r < spec.d; ++r) {
        for (int j = 0; j < spec.d; ++j) out << m_i(r, j) << ",";
      }
      out << b_i << "\n";
    }
    return;
  }

  // phase retrieval / poisson: row i holds a_i then b_i
  RngStream truth_rng = RngStream::from_seed(spec.seed, "truth");
  RngStream data_rng = RngStream::from_seed(spec.seed, "data");
  RngStream noise_rng = RngStream::from_seed(spec.seed, "noise");
  if (spec.kind == ProblemKind::PhaseRetrieval) {
    Vec x_true(spec.d);
    for (int j = 0; j < spec.d; ++j) x_true[j] = spec.truth_scale * truth_rng.normal();
    for (int i = 0; i < spec.n; ++i) {
      Vec a(spec.d);
      for (int j = 0; j < spec.d; ++j) a[j] = data_rng.normal();
      const double b = std::abs(a.dot(x_true)) + spec.noise * noise_rng.normal();
      for (int j = 0; j < spec.d; ++j) out << a[j] << ",";
      out << b << "\n";
    }
  } else {
    Vec x_true(spec.d);
    for (int j = 0; j < spec.d; ++j) x_true[j] = truth_rng.uniform(0.0, 10.0 * spec.truth_scale);
    for (int i = 0; i < spec.n; ++i) {
      Vec a(spec.d);
      for (int j = 0; j < spec.d; ++j) a[j] = std::abs(data_rng.student_t(5));
      const double mean = a.dot(x_true);
      long draw = noise_rng.poisson(mean);
      for (int tries = 0; draw == 0 && tries < 100; ++tries) draw = noise_rng.poisson(mean);
      for (int j = 0; j < spec.d; ++j) out << a[j] << ",";
      out << static_cast<double>(std::max<long>(draw, 1)) << "\n";
    }
  }
}

FiniteSumProblem load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);
  std::string header;
  std::getline(in, header);
  if (header.empty() || header[0] != '#') {
    throw ConfigError("dataset file " + path + ": missing header");
  }
  std::map<std::string, std::string> meta;
  {
    std::stringstream ss(header.substr(header.find_first_not_of("# ")));
    std::string entry;
    while (std::getline(ss, entry, ',')) {
      const auto eq = entry.find('=');
      if (eq != std::string::npos) meta[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
  }
  auto field = [&](const std::string& key) -> std::string {
    const auto it = meta.find(key);
    if (it == meta.end()) {
      throw ConfigError("dataset file " + path + ": header lacks " + key);
    }
    return it->second;
  };
  DatasetSpec spec;
  spec.kind = problem_kind_from_string(field("kind"));
  spec.d = std::stoi(field("d"));
  spec.n = std::stoi(field("n"));
  spec.seed = std::stoull(field("seed"));
  if (header.find("sigma=") != std::string::npos) spec.burg_sigma = std::stod(field("sigma"));
  spec.validate();

  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
    rows.push_back(std::move(row));
  }
  if (static_cast<int>(rows.size()) != spec.n) {
    throw ConfigError("dataset file " + path + ": expected " + std::to_string(spec.n) +
                      " rows, found " + std::to_string(rows.size()));
  }

  FiniteSumProblem p;
  p.n = spec.n;
  p.d = spec.d;
  p.f_lower = 0.0;
  RngStream init_rng = RngStream::from_seed(spec.seed, "init");

  if (spec.kind == ProblemKind::QuadraticInverse) {
    const std::size_t want = static_cast<std::size_t>(spec.d) * spec.d + 1;
    struct QuadraticData {
      std::vector<Mat> m;
      Vec b;
    };
    auto data = std::make_shared<QuadraticData>();
    data->b.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) {
      if (rows[i].size() != want) throw ConfigError("dataset file " + path + ": malformed row");
      Mat m(spec.d, spec.d);
      for (int r = 0; r < spec.d; ++r) {
        for (int c = 0; c < spec.d; ++c) m(r, c) = rows[i][r * spec.d + c];
      }
      data->m.push_back(std::move(m));
      data->b[i] = rows[i].back();
    }
    p.kernel = std::make_shared<Kernel>(std::vector<BlockKernelPtr>{make_power(spec.d, 2.0)});
    p.component_value = [data](int i, const Vec& x) {
      const double gap = x.dot(data->m[i] * x) - data->b[i];
      return 0.25 * gap * gap;
    };
    p.component_grad = [data](int i, const Vec& x) -> Vec {
      const Vec mx = data->m[i] * x;
      return (x.dot(mx) - data->b[i]) * mx;
    };
    p.x_start = random_normal_vec(init_rng, spec.d);
    p.name = "quadratic_inverse";
    return p;
  }

  auto data = std::make_shared<LinearMeasurements>();
  data->a.resize(spec.n, spec.d);
  data->b.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    if (rows[i].size() != static_cast<std::size_t>(spec.d) + 1) {
      throw ConfigError("dataset file " + path + ": malformed row");
    }
    for (int j = 0; j < spec.d; ++j) data->a(i, j) = rows[i][j];
    data->b[i] = rows[i].back();
  }
  if (spec.kind == ProblemKind::PhaseRetrieval) {
    p.kernel = std::make_shared<Kernel>(std::vector<BlockKernelPtr>{make_power(spec.d, 2.0)});
    p.component_value = [data](int i, const Vec& x) {
      const double inner = data->a.row(i).dot(x);
      const double gap = inner * inner - data->b[i] * data->b[i];
      return gap * gap;
    };
    p.component_grad = [data](int i, const Vec& x) -> Vec {
      const double inner = data->a.row(i).dot(x);
      const double gap = inner * inner - data->b[i] * data->b[i];
      return (4.0 * gap * inner) * data->a.row(i).transpose();
    };
    p.x_start = random_normal_vec(init_rng, spec.d);
    p.name = "phase_retrieval";
  } else {
    p.kernel = std::make_shared<Kernel>(
        std::vector<BlockKernelPtr>{make_regularized_burg(spec.d, spec.burg_sigma)});
    p.component_value = [data](int i, const Vec& x) {
      const double s = data->a.row(i).dot(x);
      if (!(s > 0.0)) throw DomainViolation("poisson component: nonpositive measurement a'x");
      return s * std::log(s / data->b[i]) - (s - data->b[i]);
    };
    p.component_grad = [data](int i, const Vec& x) -> Vec {
      const double s = data->a.row(i).dot(x);
      if (!(s > 0.0)) throw DomainViolation("poisson component: nonpositive measurement a'x");
      return std::log(s / data->b[i]) * data->a.row(i).transpose();
    };
    p.x_start = Vec::Constant(spec.d, 5.0);
    p.name = "poisson_inverse";
  }
  return p;
}

}  // namespace rrmd
