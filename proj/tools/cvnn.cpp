// cvnn command-line front end.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or input
// error, 3 data error (IDX, checkpoint, report or trace files), 4 power
// iteration did not converge under --strict, 5 analysis finished with
// warnings.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cvnn/cvnn.hpp"

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNonConvergence = 4, kWarnings = 5 };

struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cvnn::FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw std::runtime_error("cannot write " + path);
}

std::string g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

cvnn::Shape parse_shape(const std::string& s) {
  cvnn::Shape sh;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> sh.channels >> c1 >> sh.height >> c2 >> sh.width) || c1 != ',' || c2 != ',' || !in.eof())
    throw cvnn::ConfigError("input shape must look like C,H,W");
  return sh;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  bool strict = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  const cvnn::ExperimentConfig cfg = cvnn::load_config(a.config);
  const cvnn::ExperimentData data = cvnn::load_experiment_data(cfg);
  cvnn::TrainingCallbacks cb;
  bool warned = false;
  cb.on_epoch = [&](const cvnn::EpochSummary& s) {
    if (!s.report.converged) {
      if (a.strict) throw NonConvergence("power iteration did not converge at epoch " + std::to_string(s.row.epoch));
      warned = true;
    }
    if (a.quiet) return;
    std::fprintf(stderr, "epoch %zu  lr %.4g  train_loss %.6f", s.row.epoch, s.lr, s.row.train_loss);
    if (s.row.train_acc) std::fprintf(stderr, "  train_acc %.4f  test_acc %.4f", *s.row.train_acc, *s.row.test_acc);
    std::fprintf(stderr, "  excess_risk %.6f  sn_product %.6g\n", s.row.excess_risk, s.row.sn_product);
  };
  const cvnn::TrainingResult r = cvnn::run_training(cfg, data, cb);
  if (!a.quiet) {
    std::fprintf(stderr, "wrote %s/{trace.csv,final.ckpt.json,report.txt,summary.txt}\n", cfg.output_dir.c_str());
    if (r.trace.rows.size() >= 3) {
      try {
        const auto sp = cvnn::correlate_trace(r.trace);
        std::printf("scc=%.17g\np=%.17g\n", sp.scc, sp.p);
      } catch (const cvnn::UndefinedCorrelation& e) {
        std::fprintf(stderr, "correlation undefined: %s\n", e.what());
      }
    }
  }
  if (warned) std::fprintf(stderr, "warning: some spectral norms did not converge\n");
  return kOk;
}

// -------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string checkpoint;
  std::string input_shape;
  std::string output;
  double tol = 1e-10;
  int max_iter = 1000;
  std::uint64_t seed = 0;
  std::size_t budget_mb = 256;
  std::optional<double> amptanh_alpha;
  bool strict = false;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const cvnn::Network net = cvnn::load_checkpoint(a.checkpoint);
  if (!a.input_shape.empty() && !(parse_shape(a.input_shape) == net.input_shape()))
    throw cvnn::CheckpointShapeError("checkpoint input shape does not match --input-shape");
  cvnn::AnalyzeOptions opt;
  opt.power = {a.tol, a.max_iter, a.seed};
  opt.lowering_budget_bytes = a.budget_mb << 20;
  opt.amplitude_tanh_alpha = a.amptanh_alpha;
  opt.probe_seed = a.seed;
  const cvnn::SpectralReport rep = cvnn::analyze(net, opt);
  write_text(a.output, cvnn::to_key_values(rep));
  if (a.strict && !rep.converged) return kNonConvergence;
  if (rep.has_warnings()) {
    if (rep.sn_product_only) std::fprintf(stderr, "warning: sn-product-only report (lowering budget exceeded)\n");
    if (rep.empirical_rho) std::fprintf(stderr, "warning: some Lipschitz constants are empirical\n");
    if (rep.thresholds_nonzero) std::fprintf(stderr, "warning: nonzero thresholds, bounds assume none\n");
    if (!rep.converged) std::fprintf(stderr, "warning: power iteration did not converge\n");
    return kWarnings;
  }
  return kOk;
}

// --------------------------------------------------------------- bounds

struct BoundsArgs {
  std::string report;
  std::string mode = "iid";
  double M = 0.0;
  double n = 0.0;
  std::optional<double> W;
  double z_norm = 0.0;
  double delta = 0.05;
  std::optional<double> eps;
};

int cmd_bounds(const BoundsArgs& a) {
  const cvnn::SpectralReport rep = cvnn::parse_spectral_report(read_text(a.report));
  if (rep.sn_product_only || !rep.r_a)
    throw cvnn::ConfigError("report is sn-product-only; R_A-based bounds are unavailable");
  const double W = a.W ? *a.W : double(rep.max_width);
  const double r_a = *rep.r_a;
  std::printf("mode = %s\n", a.mode.c_str());
  std::printf("r_a = %s\n", g12(r_a).c_str());
  std::printf("M = %s\n", g12(a.M).c_str());
  std::printf("W = %s\n", g12(W).c_str());
  std::printf("z_norm = %s\n", g12(a.z_norm).c_str());
  if (a.mode == "pac") {
    if (!a.eps) throw cvnn::ConfigError("mode pac needs --eps");
    std::printf("eps = %s\n", g12(*a.eps).c_str());
    std::printf("delta = %s\n", g12(a.delta).c_str());
    const std::uint64_t n = cvnn::pac_sample_size(*a.eps, a.delta, a.M, a.z_norm, W, r_a);
    std::printf("n = %llu\n", static_cast<unsigned long long>(n));
    return kOk;
  }
  std::printf("n = %s\n", g12(a.n).c_str());
  if (a.mode == "rademacher") {
    std::printf("rademacher_bound = %s\n", g12(cvnn::rademacher_bound(a.M, a.n, W, a.z_norm, r_a)).c_str());
    return kOk;
  }
  const cvnn::BoundInputs in{a.M, a.n, W, a.z_norm, r_a, a.delta};
  std::printf("delta = %s\n", g12(a.delta).c_str());
  if (a.mode == "iid") {
    std::printf("bound_iid = %s\n", g12(cvnn::bound_iid(in)).c_str());
  } else {
    std::printf("bound_sequential = %s\n", g12(cvnn::bound_sequential(in)).c_str());
  }
  return kOk;
}

// ------------------------------------------------------------ cover-lab

struct CoverArgs {
  std::size_t d = 2, m = 2, n = 3;
  double a = 1.0, eps = 0.5;
  std::size_t samples = 50, trials = 64;
  std::uint64_t seed = 0;
  std::string output;
};

int cmd_cover_lab(const CoverArgs& a) {
  const cvnn::CMatrix z = cvnn::random_data_matrix(a.n, a.d, a.seed);
  const cvnn::CoverReport rep = cvnn::lemma1_cover_check(z, a.m, a.a, a.eps, a.samples, a.trials, a.seed);
  write_text(a.output, cvnn::to_key_values(rep));
  return kOk;
}

// ---------------------------------------------------------------- stats

int cmd_stats(const std::string& trace) {
  const cvnn::SpearmanResult r = cvnn::correlate_trace(cvnn::load_trace(trace));
  std::printf("scc=%.17g\np=%.17g\n", r.scc, r.p);
  std::printf("method=%s\n", r.method == cvnn::PValueMethod::ExactPermutation ? "exact" : "t");
  return kOk;
}

// ------------------------------------------------------ lipschitz-probe

struct ProbeArgs {
  std::string kind;
  double domain_bound = 10.0;
  std::size_t pairs = 100000;
  std::uint64_t seed = 0;
};

int cmd_lipschitz_probe(const ProbeArgs& a) {
  const cvnn::Activation act = cvnn::parse_activation(a.kind);
  const double est = cvnn::lipschitz_probe(act, a.domain_bound, a.pairs, a.seed);
  std::printf("activation = %s\n", cvnn::to_string(act).c_str());
  std::printf("estimate = %.17g\n", est);
  std::optional<double> declared;
  if (act.type == cvnn::ActivationType::AmplitudeTanh) {
    declared = cvnn::declared_lipschitz(act, a.domain_bound);
  } else {
    declared = cvnn::declared_lipschitz(act, std::nullopt);
  }
  if (declared) {
    std::printf("declared = %.17g\n", *declared);
  } else {
    std::printf("declared = none\n");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex-valued network training, spectral analysis and bounds"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train from a config file; writes trace, checkpoint and report");
  t->add_option("config", train.config, "Config file (key = value lines)")->required();
  t->add_flag("--strict", train.strict, "Treat power-iteration non-convergence as an error");
  t->add_flag("--quiet", train.quiet, "No progress output");

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Spectral report of a checkpoint");
  a->add_option("checkpoint", an.checkpoint, "Checkpoint JSON")->required();
  a->add_option("--input-shape", an.input_shape, "Expected input shape C,H,W");
  a->add_option("-o,--output", an.output, "Report path (default stdout)");
  a->add_option("--tol", an.tol, "Power-iteration tolerance");
  a->add_option("--max-iter", an.max_iter, "Power-iteration iteration cap");
  a->add_option("--seed", an.seed, "Seed for start vectors and probes");
  a->add_option("--budget-mb", an.budget_mb, "Lowering budget for conv (2,1) norms");
  a->add_option("--amptanh-alpha", an.amptanh_alpha, "Domain bound for the amplitude-tanh constant");
  a->add_flag("--strict", an.strict, "Exit 4 when power iteration does not converge");

  BoundsArgs bd;
  auto* b = app.add_subcommand("bounds", "Evaluate generalization bounds from a report");
  b->add_option("report", bd.report, "Spectral report file")->required();
  b->add_option("--mode", bd.mode, "iid, sequential, rademacher or pac")
      ->check(CLI::IsMember({"iid", "sequential", "rademacher", "pac"}));
  b->add_option("--M", bd.M, "Loss ceiling")->required();
  b->add_option("--n", bd.n, "Sample count (ignored for pac)");
  b->add_option("--W", bd.W, "Max layer width (default from report)");
  b->add_option("--z-norm", bd.z_norm, "Frobenius norm of the data matrix")->required();
  b->add_option("--delta", bd.delta, "Confidence parameter in (0,1)");
  b->add_option("--eps", bd.eps, "Target accuracy (pac)");

  CoverArgs cv;
  auto* c = app.add_subcommand("cover-lab", "Pointwise check of the matrix cover on random data");
  c->add_option("--d", cv.d, "Data dimension");
  c->add_option("--m", cv.m, "Output dimension");
  c->add_option("--n", cv.n, "Sample count");
  c->add_option("--a", cv.a, "(2,1)-norm radius");
  c->add_option("--eps", cv.eps, "Cover resolution");
  c->add_option("--samples", cv.samples, "Random targets");
  c->add_option("--trials", cv.trials, "Sparsification trials per target");
  c->add_option("--seed", cv.seed, "Seed");
  c->add_option("-o,--output", cv.output, "Report path (default stdout)");

  std::string trace;
  auto* s = app.add_subcommand("stats", "Spearman correlation of sn_product and excess_risk");
  s->add_option("trace", trace, "Trace CSV")->required();

  ProbeArgs pr;
  auto* p = app.add_subcommand("lipschitz-probe", "Empirical Lipschitz constant of an activation");
  p->add_option("kind", pr.kind, "splittanh, crelu, amptanh or modrelu(<b>)")->required();
  p->add_option("--domain-bound", pr.domain_bound, "Box half-width");
  p->add_option("--pairs", pr.pairs, "Sample pairs");
  p->add_option("--seed", pr.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*t) return cmd_train(train);
    if (*a) return cmd_analyze(an);
    if (*b) return cmd_bounds(bd);
    if (*c) return cmd_cover_lab(cv);
    if (*s) return cmd_stats(trace);
    if (*p) return cmd_lipschitz_probe(pr);
  } catch (const NonConvergence& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNonConvergence;
  } catch (const cvnn::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const cvnn::DomainError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kConfig;
  } catch (const cvnn::IdxError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const cvnn::CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kData;
  } catch (const cvnn::FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kData;
  } catch (const cvnn::UndefinedCorrelation& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
