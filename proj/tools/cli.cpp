#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "io.hpp"
#include "json.hpp"
#include "mnig/model_selection.hpp"

namespace mnig::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct FitOptions {
  std::string input;
  std::vector<std::string> columns;
  int gmin = 1;
  int gmax = 5;
  long iters = 2000;
  int chains = 3;
  double burnin = 0.5;
  std::uint64_t seed = 1;
  bool scale = false;
  std::string out = ".";
  int inner_steps = 10;
  int grid_size = 200;
  std::string relabel = "pivot";
  PriorOptions prior;
};

struct SimulateOptions {
  std::string spec;
  long n = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

struct EvaluateOptions {
  std::string truth;
  std::string est;
};

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

ordered_json interval_json(const Interval& iv) {
  return ordered_json{{"mean", iv.mean}, {"lower", iv.lower}, {"upper", iv.upper}};
}

ordered_json intervals_json(const std::vector<Interval>& ivs) {
  ordered_json a = ordered_json::array();
  for (const auto& iv : ivs) a.push_back(interval_json(iv));
  return a;
}

ordered_json config_json(const FitOptions& o) {
  // Both unset: the prior is centred at the sample mean.
  const bool centred = !o.prior.a1 && !o.prior.a2;
  auto entry = [&](const std::optional<double>& v, const char* centred_form) {
    if (v) return ordered_json(*v);
    return centred ? ordered_json(centred_form) : ordered_json(0.0);
  };
  ordered_json prior{{"a0", o.prior.a0},
                     {"a1", entry(o.prior.a1, "a0*mean(y)")},
                     {"a2", entry(o.prior.a2, "2*a4*mean(y)")},
                     {"a3", o.prior.a3},
                     {"a4", o.prior.a4},
                     {"dirichlet", o.prior.dirichlet}};
  prior["nu0"] = o.prior.nu0 ? ordered_json(*o.prior.nu0) : ordered_json("d+2");
  prior["lambda0_scale"] = o.prior.lambda0_scale.value_or(1.0);
  return ordered_json{{"input", o.input},
                      {"columns", o.columns},
                      {"gmin", o.gmin},
                      {"gmax", o.gmax},
                      {"iters", o.iters},
                      {"chains", o.chains},
                      {"burnin", o.burnin},
                      {"seed", o.seed},
                      {"scale", o.scale},
                      {"inner_steps", o.inner_steps},
                      {"grid_size", o.grid_size},
                      {"relabel", o.relabel},
                      {"prior", prior}};
}

/// Maps a fit on z-scored data back to the original coordinates.
void unscale_fit(FitResult& f, const Eigen::VectorXd& shift, const Eigen::VectorXd& scale,
                 double loglik_offset) {
  for (auto& draw : f.pooled) draw = affine_transform(draw, shift, scale);
  for (auto& ll : f.pooled_loglik) ll += loglik_offset;
  for (auto& ch : f.chains) {
    for (auto& ll : ch.loglik) ll += loglik_offset;
  }
  f.max_loglik += loglik_offset;
  f.summary = summarize(f.pooled);
  f.posterior_mean = f.summary.mean_model();
}

std::string selection_csv(const SelectionResult& sel) {
  std::ostringstream s;
  s << "G,max_loglik,n_params,bic,aic,psrf,converged,status\n";
  for (const auto& r : sel.table) {
    s << r.G << ',' << format_double(r.max_loglik) << ',' << r.n_params << ','
      << format_double(r.bic) << ',' << format_double(r.aic) << ','
      << (r.psrf ? format_double(*r.psrf) : "NA") << ',' << (r.converged ? 1 : 0) << ','
      << (r.error ? "failed" : "ok") << '\n';
  }
  return s.str();
}

std::string traces_csv(const SelectionResult& sel) {
  std::ostringstream s;
  s << "G,chain,iteration,loglik\n";
  for (const auto& f : sel.fits) {
    for (const auto& ch : f.chains) {
      for (std::size_t t = 0; t < ch.loglik.size(); ++t) {
        s << f.G << ',' << ch.chain_id + 1 << ',' << t << ',' << format_double(ch.loglik[t])
          << '\n';
      }
    }
  }
  return s.str();
}

std::string psrf_csv(const SelectionResult& sel) {
  std::ostringstream s;
  s << "G,psrf,constant_chains,converged,chains_used,chains_failed\n";
  for (const auto& f : sel.fits) {
    s << f.G << ',' << (f.psrf ? format_double(f.psrf->value) : "NA") << ','
      << (f.psrf && f.psrf->constant_chains ? 1 : 0) << ',' << (f.converged ? 1 : 0) << ','
      << f.used_chains.size() << ',' << f.chains.size() - f.used_chains.size() << '\n';
  }
  return s.str();
}

std::string classification_csv(const FitResult& f) {
  std::ostringstream s;
  s << "row,label";
  for (int g = 1; g <= f.G; ++g) s << ",prob_" << g;
  s << '\n';
  for (Eigen::Index i = 0; i < f.classification.size(); ++i) {
    s << i + 1 << ',' << f.classification[i];
    for (Eigen::Index g = 0; g < f.G; ++g) s << ',' << format_double(f.membership(i, g));
    s << '\n';
  }
  return s.str();
}

std::string density_grid_csv(const MixtureModel& model, const Eigen::MatrixXd& y, int size) {
  const Eigen::RowVectorXd lo = y.colwise().minCoeff();
  const Eigen::RowVectorXd hi = y.colwise().maxCoeff();
  const Eigen::RowVectorXd pad = 0.1 * (hi - lo).cwiseMax(1e-12);
  const Eigen::RowVectorXd a = lo - pad;
  const Eigen::RowVectorXd b = hi + pad;
  Eigen::MatrixXd grid(static_cast<Eigen::Index>(size) * size, 2);
  Eigen::Index k = 0;
  for (int i = 0; i < size; ++i) {
    const double x = a[0] + (b[0] - a[0]) * i / (size - 1);
    for (int j = 0; j < size; ++j) {
      grid(k, 0) = x;
      grid(k, 1) = a[1] + (b[1] - a[1]) * j / (size - 1);
      ++k;
    }
  }
  const Eigen::MatrixXd logd = weighted_log_densities(model, grid);
  std::ostringstream s;
  s << "x,y,density\n";
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    s << format_double(grid(r, 0)) << ',' << format_double(grid(r, 1)) << ','
      << format_double(std::exp(log_sum_exp(logd.row(r).transpose()))) << '\n';
  }
  return s.str();
}

ordered_json component_json(const MnigComponent& c, const ComponentSummary& cs) {
  ordered_json Delta = ordered_json::array();
  for (Eigen::Index r = 0; r < c.dim(); ++r) Delta.push_back(to_vec(c.Delta().row(r).transpose()));
  return ordered_json{{"mu", to_vec(c.mu())},
                      {"beta", to_vec(c.beta())},
                      {"delta", c.delta()},
                      {"gamma", c.gamma()},
                      {"Delta", Delta},
                      {"intervals",
                       {{"weight", interval_json(cs.weight)},
                        {"mu", intervals_json(cs.mu)},
                        {"beta", intervals_json(cs.beta)},
                        {"delta", interval_json(cs.delta)},
                        {"gamma", interval_json(cs.gamma)},
                        {"Delta", intervals_json(cs.Delta)}}}};
}

ordered_json summary_json(const FitOptions& o, const SelectionResult& sel) {
  const FitResult& best = sel.best();
  ordered_json table = ordered_json::array();
  for (const auto& r : sel.table) {
    ordered_json row{{"G", r.G}, {"n_params", r.n_params}, {"converged", r.converged}};
    if (r.error) {
      row["error"] = *r.error;
    } else {
      row["max_loglik"] = r.max_loglik;
      row["bic"] = r.bic;
      row["aic"] = r.aic;
      row["psrf"] = r.psrf ? ordered_json(*r.psrf) : ordered_json(nullptr);
    }
    table.push_back(row);
  }
  ordered_json comps = ordered_json::array();
  for (std::size_t g = 0; g < best.posterior_mean.components.size(); ++g) {
    comps.push_back(component_json(best.posterior_mean.components[g], best.summary.components[g]));
  }
  ordered_json failures = ordered_json::array();
  for (const auto& f : sel.fits) {
    for (const auto& ch : f.chains) {
      if (!ch.failure) continue;
      failures.push_back({{"G", f.G},
                          {"chain", ch.chain_id + 1},
                          {"iteration", ch.failure->iteration},
                          {"component", ch.failure->component + 1},
                          {"message", ch.failure->message}});
    }
  }
  return ordered_json{
      {"config", config_json(o)},
      {"selection_table", table},
      {"best_model",
       {{"G", best.G}, {"weights", to_vec(best.posterior_mean.weights)}, {"components", comps}}},
      {"diagnostics",
       {{"psrf", best.psrf ? ordered_json(best.psrf->value) : ordered_json(nullptr)},
        {"converged", best.converged},
        {"selected_among_converged", sel.best_converged},
        {"chain_failures", failures}}},
      {"classification_path", "classification.csv"}};
}

int cmd_fit(const FitOptions& o, std::ostream& out) {
  Dataset data = load_dataset(o.input, o.columns);
  data.validate();
  if (o.gmin < 1 || o.gmax < o.gmin) throw InputError("need 1 <= gmin <= gmax");
  if (o.gmax > data.n()) throw InputError("gmax exceeds the number of observations");
  if (o.grid_size < 2) throw InputError("grid size must be at least 2");
  RelabelMethod relabel = RelabelMethod::kPivot;
  if (o.relabel == "weights") {
    relabel = RelabelMethod::kWeightOrder;
  } else if (o.relabel != "pivot") {
    throw InputError("relabel must be 'pivot' or 'weights'");
  }

  const Dataset original = data;
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(data.dim());
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(data.dim());
  if (o.scale) {
    if (data.n() < 2) throw InputError("scaling needs at least two rows");
    shift = data.y.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.y.rowwise() - shift.transpose();
    scale = (centered.colwise().squaredNorm() / static_cast<double>(data.n() - 1))
                .cwiseSqrt()
                .transpose();
    if ((scale.array() <= 0.0).any()) throw InputError("cannot scale a constant column");
    data.y = centered.array().rowwise() / scale.transpose().array();
  }

  GibbsConfig cfg;
  cfg.n_iterations = o.iters;
  cfg.n_chains = o.chains;
  cfg.burnin_fraction = o.burnin;
  cfg.seed = o.seed;
  cfg.inner_gig_steps = o.inner_steps;
  cfg.relabel = relabel;
  try {
    cfg.validate();
    burnin_count(static_cast<std::size_t>(cfg.n_iterations) + 1, cfg.burnin_fraction);
    o.prior.build(data.dim(), o.gmin);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }

  SelectionResult sel = select_model(data, o.gmin, o.gmax, o.prior, cfg);
  if (o.scale) {
    const double offset = -static_cast<double>(data.n()) * scale.array().log().sum();
    for (auto& f : sel.fits) unscale_fit(f, shift, scale, offset);
    for (auto& r : sel.table) {
      if (r.error) continue;
      r.max_loglik += offset;
      r.bic = bic(r.max_loglik, r.n_params, static_cast<long>(data.n()));
      r.aic = aic(r.max_loglik, r.n_params);
    }
  }

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string());
  const FitResult& best = sel.best();
  write_text(dir / "selection_table.csv", selection_csv(sel));
  write_text(dir / "summary.json", summary_json(o, sel).dump(2) + "\n");
  write_text(dir / "classification.csv", classification_csv(best));
  write_text(dir / "traces.csv", traces_csv(sel));
  write_text(dir / "psrf.csv", psrf_csv(sel));
  if (original.dim() == 2) {
    write_text(dir / "density_grid.csv",
               density_grid_csv(best.posterior_mean, original.y, o.grid_size));
  }

  out << selection_csv(sel);
  out << "best G: " << sel.best_G << (sel.best_converged ? "" : " (no converged fit)") << '\n';
  if (original.labels) {
    out << "ARI vs label column: "
        << format_double(adjusted_rand_index(*original.labels, best.classification)) << '\n';
  }
  return kOk;
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  if (o.n < 1) throw InputError("n must be positive");
  const MixtureModel model = model_from_json(read_json(o.spec));
  RngStream rng(o.seed, 0);
  const Dataset data = generate_dataset(model, o.n, rng);
  std::ostringstream s;
  for (Eigen::Index j = 0; j < data.dim(); ++j) s << 'y' << j + 1 << ',';
  s << "label\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) s << format_double(data.y(i, j)) << ',';
    s << (*data.labels)[i] << '\n';
  }
  if (o.out.empty() || o.out == "-") {
    out << s.str();
  } else {
    write_text(o.out, s.str());
  }
  return kOk;
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  const Eigen::VectorXi truth = load_labels(o.truth);
  const Eigen::VectorXi est = load_labels(o.est);
  if (truth.size() != est.size()) {
    throw InputError("label files differ in length (" + std::to_string(truth.size()) + " vs " +
                     std::to_string(est.size()) + ")");
  }
  if (truth.size() < 2) throw InputError("need at least two labelled rows");
  const AriResult ari = adjusted_rand(truth, est);
  const ContingencyTable t = contingency_table(truth, est);
  out << "ARI: " << format_double(ari.value) << (ari.degenerate ? " (degenerate)" : "") << '\n';
  out << "truth\\est";
  for (int c : t.col_labels) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    out << t.row_labels[r];
    for (Eigen::Index c = 0; c < t.counts.cols(); ++c) {
      out << ',' << t.counts(static_cast<Eigen::Index>(r), c);
    }
    out << '\n';
  }
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian mixtures of multivariate normal inverse Gaussian distributions"};
  app.require_subcommand(1);

  FitOptions fo;
  auto* fit = app.add_subcommand("fit", "fit mixtures over a range of G and select by BIC");
  fit->set_config("--config", "", "TOML/INI file with option values");
  fit->add_option("--input", fo.input, "CSV file with a header row")->required();
  fit->add_option("--columns", fo.columns, "data columns to use (default: all but 'label')")
      ->delimiter(',');
  fit->add_option("--gmin", fo.gmin, "smallest number of components");
  fit->add_option("--gmax", fo.gmax, "largest number of components");
  fit->add_option("--iters", fo.iters, "Gibbs iterations per chain");
  fit->add_option("--chains", fo.chains, "independent chains");
  fit->add_option("--burnin", fo.burnin, "burn-in fraction in (0, 1)");
  fit->add_option("--seed", fo.seed, "random seed");
  fit->add_flag("--scale", fo.scale, "z-score columns before fitting");
  fit->add_option("--out", fo.out, "output directory");
  fit->add_option("--inner-steps", fo.inner_steps, "continued-fraction steps per latent update");
  fit->add_option("--grid-size", fo.grid_size, "density grid points per axis (d = 2)");
  fit->add_option("--relabel", fo.relabel, "label-switching fix: pivot or weights");
  fit->add_option("--a0", fo.prior.a0, "prior a0");
  fit->add_option("--a1", fo.prior.a1, "prior a1 (all coordinates; default centres on the data)");
  fit->add_option("--a2", fo.prior.a2, "prior a2 (all coordinates; default centres on the data)");
  fit->add_option("--a3", fo.prior.a3, "prior a3");
  fit->add_option("--a4", fo.prior.a4, "prior a4");
  fit->add_option("--dirichlet", fo.prior.dirichlet, "Dirichlet concentration");
  fit->add_option("--nu0", fo.prior.nu0, "inverse-Wishart degrees of freedom (default d + 2)");
  fit->add_option("--lambda0", fo.prior.lambda0_scale, "inverse-Wishart scale multiple of I");

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "draw a labelled dataset from a model spec");
  sim->add_option("--spec", so.spec, "model JSON")->required();
  sim->add_option("--n", so.n, "number of rows");
  sim->add_option("--seed", so.seed, "random seed");
  sim->add_option("--out", so.out, "output CSV (default stdout)");

  EvaluateOptions eo;
  auto* eval = app.add_subcommand("evaluate", "adjusted Rand index of two label files");
  eval->add_option("--truth", eo.truth, "CSV with the reference labels")->required();
  eval->add_option("--est", eo.est, "CSV with the estimated labels")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    if (e.get_exit_code() == 0) {
      out << sub->help();
      return kOk;
    }
    err << "error: " << e.what() << '\n' << sub->help();
    return kInputError;
  }

  try {
    if (fit->parsed()) return cmd_fit(fo, out);
    if (sim->parsed()) return cmd_simulate(so, out);
    return cmd_evaluate(eo, out);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kSchemaError;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const FitError& e) {
    err << "fit failed: " << e.what() << '\n';
    return kFitFailure;
  } catch (const std::invalid_argument& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::domain_error& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace mnig::cli
