// getuda: synthetic-benchmark generation, two-stage training, evaluation,
// geometry diagnostics, and numerical verification of the nuclear-norm bounds.
//
// Exit codes: 0 success, 1 validation/configuration failure (including bound
// violations under `verify`), 2 numerical failure.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "getuda/getuda.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace getuda;

namespace {

struct RunConfig {
  std::uint64_t seed = 1;
  bool use_synthetic = true;
  std::string source_csv;
  std::string target_csv;
  SyntheticConfig synth;
  TrainingConfig train;
  std::string out_dir = "out";
};

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key \"" + key + "\" in " + where);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }

  RunConfig cfg;
  reject_unknown_keys(j, {"seed", "data", "train", "output"}, "config root");
  try {
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown_keys(d,
                          {"source_csv", "target_csv", "num_classes", "input_dim",
                           "samples_per_class", "separation", "rotation_angle",
                           "translation", "noise"},
                          "data");
      if (d.contains("source_csv") || d.contains("target_csv")) {
        cfg.use_synthetic = false;
        cfg.source_csv = d.at("source_csv").get<std::string>();
        cfg.target_csv = d.at("target_csv").get<std::string>();
      }
      if (d.contains("num_classes")) cfg.synth.num_classes = d["num_classes"];
      if (d.contains("input_dim")) cfg.synth.input_dim = d["input_dim"];
      if (d.contains("samples_per_class")) cfg.synth.samples_per_class = d["samples_per_class"];
      if (d.contains("separation")) cfg.synth.separation = d["separation"];
      if (d.contains("rotation_angle")) cfg.synth.rotation_angle = d["rotation_angle"];
      if (d.contains("translation")) cfg.synth.translation = d["translation"];
      if (d.contains("noise")) cfg.synth.noise = d["noise"];
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      reject_unknown_keys(t,
                          {"t_warm", "t_adapt", "batch_size", "learning_rate",
                           "weight_decay", "lambda_dc", "lambda_co", "lambda_t", "tau",
                           "normalize_features", "hidden_sizes", "feature_dim"},
                          "train");
      if (t.contains("t_warm")) cfg.train.t_warm = t["t_warm"];
      if (t.contains("t_adapt")) cfg.train.t_adapt = t["t_adapt"];
      if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"];
      if (t.contains("learning_rate")) cfg.train.learning_rate = t["learning_rate"];
      if (t.contains("weight_decay")) cfg.train.weight_decay = t["weight_decay"];
      if (t.contains("lambda_dc")) cfg.train.lambda_dc = t["lambda_dc"];
      if (t.contains("lambda_co")) cfg.train.lambda_co = t["lambda_co"];
      if (t.contains("lambda_t")) cfg.train.lambda_t = t["lambda_t"];
      if (t.contains("tau")) cfg.train.tau = t["tau"];
      if (t.contains("normalize_features"))
        cfg.train.normalize_features = t["normalize_features"];
      if (t.contains("hidden_sizes"))
        cfg.train.hidden_sizes = t["hidden_sizes"].get<std::vector<int>>();
      if (t.contains("feature_dim")) cfg.train.feature_dim = t["feature_dim"];
    }
    if (j.contains("output")) {
      reject_unknown_keys(j["output"], {"dir"}, "output");
      if (j["output"].contains("dir")) cfg.out_dir = j["output"]["dir"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed config value: " + std::string(e.what()));
  }
  return cfg;
}

json synth_to_json(const SyntheticConfig& s) {
  return json{{"num_classes", s.num_classes},
              {"input_dim", s.input_dim},
              {"samples_per_class", s.samples_per_class},
              {"separation", s.separation},
              {"rotation_angle", s.rotation_angle},
              {"translation", s.translation},
              {"noise", s.noise}};
}

json train_to_json(const TrainingConfig& t) {
  return json{{"t_warm", t.t_warm},
              {"t_adapt", t.t_adapt},
              {"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate},
              {"weight_decay", t.weight_decay},
              {"lambda_dc", t.lambda_dc},
              {"lambda_co", t.lambda_co},
              {"lambda_t", t.lambda_t},
              {"tau", t.tau},
              {"normalize_features", t.normalize_features},
              {"hidden_sizes", t.hidden_sizes},
              {"feature_dim", t.feature_dim}};
}

json record_to_json(const EpochRecord& r) {
  auto num = [](double v) { return std::isnan(v) ? json() : json(v); };
  return json{{"epoch", r.epoch},
              {"l_src_ce", r.l_src_ce},
              {"l_tgt_ent", r.l_tgt_ent},
              {"l_dc", r.l_dc},
              {"l_co", r.l_co},
              {"total", r.total},
              {"pseudo_count", r.pseudo_count},
              {"pseudo_acc", num(r.pseudo_acc)},
              {"target_acc", num(r.target_acc)},
              {"interclass_mean_angle_deg", num(r.interclass_mean_angle_deg)},
              {"crossdomain_mean_angle_deg", num(r.crossdomain_mean_angle_deg)}};
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

std::pair<DomainDataset, DomainDataset> load_run_data(const RunConfig& cfg) {
  if (cfg.use_synthetic) {
    SyntheticConfig s = cfg.synth;
    s.seed = cfg.seed;
    return generate_synthetic_shift(s);
  }
  DomainDataset src = load_dataset_csv(cfg.source_csv);
  DomainDataset tgt = load_dataset_csv(cfg.target_csv, src.num_classes);
  return {std::move(src), std::move(tgt)};
}

int cmd_gen_data(const RunConfig& cfg) {
  SyntheticConfig s = cfg.synth;
  s.seed = cfg.seed;
  const auto [src, tgt] = generate_synthetic_shift(s);
  fs::create_directories(cfg.out_dir);
  const auto src_path = fs::path(cfg.out_dir) / "source.csv";
  const auto tgt_path = fs::path(cfg.out_dir) / "target.csv";
  save_dataset_csv(src, src_path.string());
  save_dataset_csv(tgt, tgt_path.string());
  std::cout << "wrote " << src_path.string() << " (" << src.size() << " samples), "
            << tgt_path.string() << " (" << tgt.size() << " samples)\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, int repeats) {
  if (repeats < 1) throw ConfigError("--repeats must be >= 1");
  fs::create_directories(cfg.out_dir);

  std::vector<json> repeat_finals;
  std::vector<double> accs;
  TrainingHistory first_history;
  Model first_model;

  for (int rep = 0; rep < repeats; ++rep) {
    RunConfig rc = cfg;
    rc.seed = cfg.seed + static_cast<std::uint64_t>(rep);
    rc.train.seed = rc.seed;
    const auto [src, tgt] = load_run_data(rc);
    auto result = train(rc.train, src, tgt);
    const EpochRecord last =
        result.history.records.empty() ? EpochRecord{} : result.history.records.back();
    json fin = record_to_json(last);
    fin["seed"] = rc.seed;
    repeat_finals.push_back(fin);
    if (!std::isnan(last.target_acc)) accs.push_back(last.target_acc);
    if (rep == 0) {
      first_history = result.history;
      first_model = std::move(result.model);
    }
  }

  const auto model_path = fs::path(cfg.out_dir) / "model.json";
  const auto history_path = fs::path(cfg.out_dir) / "history.csv";
  const auto metrics_path = fs::path(cfg.out_dir) / "metrics.json";
  save_checkpoint(first_model, model_path.string());
  save_history_csv(first_history, history_path.string());

  double mean = 0, var = 0;
  for (double a : accs) mean += a;
  if (!accs.empty()) mean /= accs.size();
  for (double a : accs) var += (a - mean) * (a - mean);
  if (!accs.empty()) var /= accs.size();

  json metrics;
  metrics["seed"] = cfg.seed;
  metrics["repeats"] = repeats;
  metrics["config"] = {{"seed", cfg.seed},
                       {"data", cfg.use_synthetic
                                    ? synth_to_json(cfg.synth)
                                    : json{{"source_csv", cfg.source_csv},
                                           {"target_csv", cfg.target_csv}}},
                       {"train", train_to_json(cfg.train)},
                       {"output", {{"dir", cfg.out_dir}}}};
  metrics["final"] = repeat_finals.front();
  metrics["repeat_finals"] = repeat_finals;
  metrics["target_acc_mean"] = accs.empty() ? json() : json(mean);
  metrics["target_acc_std"] = accs.empty() ? json() : json(std::sqrt(var));
  write_json(metrics, metrics_path.string());

  std::cout << "wrote " << model_path.string() << ", " << history_path.string() << ", "
            << metrics_path.string() << "\n";
  if (!accs.empty())
    std::cout << "target accuracy: " << mean << " +/- " << std::sqrt(var) << " over "
              << repeats << " repeat(s)\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& out_path) {
  const Model model = load_checkpoint(model_path);
  const DomainDataset ds =
      load_dataset_csv(data_path, static_cast<int>(model.classifier.num_classes()));
  const EvalResult r = evaluate(model, ds);
  json j;
  j["model"] = model_path;
  j["data"] = data_path;
  j["n"] = ds.size();
  j["accuracy"] = r.accuracy;
  j["per_class_accuracy"] = r.per_class_accuracy;
  j["per_class_count"] = r.per_class_count;
  std::cout << j.dump(2) << "\n";
  write_json(j, out_path);
  return 0;
}

int cmd_verify(std::uint64_t seed, long trials, const std::string& out_path) {
  const auto reports = run_theory_suite(seed, trials);
  json bounds = json::object();
  bool all_passed = true;
  for (const auto& r : reports) {
    bounds[r.name] = {{"trials", r.trials},
                      {"violations", r.violations},
                      {"max_slack", r.max_slack},
                      {"witness_residual", r.witness_residual}};
    if (r.violations > 0) all_passed = false;
  }
  json j;
  j["seed"] = seed;
  j["trials"] = trials;
  j["all_passed"] = all_passed;
  j["bounds"] = bounds;
  write_json(j, out_path);
  for (const auto& r : reports)
    std::cout << (r.violations == 0 ? "[PASS] " : "[FAIL] ") << r.name << " ("
              << r.trials << " trials, " << r.violations << " violations)\n";
  std::cout << "wrote " << out_path << "\n";
  return all_passed ? 0 : 1;
}

int cmd_diag(const std::string& model_path, const std::string& data_path,
             const std::string& out_json, const std::string& out_csv) {
  const Model model = load_checkpoint(model_path);
  const DomainDataset ds =
      load_dataset_csv(data_path, static_cast<int>(model.classifier.num_classes()));
  const Matrix z = forward_features(model.projector, ds.x);

  // Truth labels when present, otherwise the classifier's argmax.
  std::vector<int> labels = ds.labels;
  const auto pl = assign_pseudo_labels(forward_classifier(model.classifier, z), 1.0);
  for (std::size_t j = 0; j < labels.size(); ++j)
    if (labels[j] < 0) labels[j] = pl.labels[j];
  const std::vector<Domain> domains(ds.size(), ds.domain);
  const auto diag = geometry_diagnostics(z, labels, domains, ds.num_classes);

  constexpr double kRad2Deg = 180.0 / M_PI;
  auto deg = [&](double rad) { return std::isnan(rad) ? json() : json(rad * kRad2Deg); };
  json classes = json::array();
  for (const auto& pc : diag.classes)
    classes.push_back({{"label", pc.label},
                       {"n_source", pc.n_source},
                       {"n_target", pc.n_target},
                       {"nuclear_source", pc.nuclear_source},
                       {"nuclear_target", pc.nuclear_target},
                       {"nuclear_joint", pc.nuclear_joint},
                       {"rank_source", pc.rank_source},
                       {"rank_target", pc.rank_target},
                       {"rank_joint", pc.rank_joint},
                       {"cross_domain_mean_angle_deg", deg(pc.cross_domain_mean_angle)},
                       {"cross_domain_max_angle_deg", deg(pc.cross_domain_max_angle)}});
  json j;
  j["model"] = model_path;
  j["data"] = data_path;
  j["global_nuclear_norm"] = diag.global_nuclear_norm;
  j["interclass_mean_angle_deg"] = deg(diag.interclass_mean_angle);
  j["interclass_min_angle_deg"] = deg(diag.interclass_min_angle);
  j["crossdomain_mean_angle_deg"] = deg(diag.crossdomain_mean_angle);
  j["classes"] = classes;
  j["skipped_classes"] = diag.skipped_classes;
  write_json(j, out_json);

  std::ofstream csv(out_csv);
  if (!csv) throw ConfigError("cannot open for writing: " + out_csv);
  csv << "domain,label";
  for (std::size_t i = 0; i < z.rows(); ++i) csv << ",z" << i;
  csv << "\n" << std::setprecision(17);
  for (std::size_t col = 0; col < z.cols(); ++col) {
    csv << to_string(ds.domain) << "," << ds.labels[col];
    for (std::size_t i = 0; i < z.rows(); ++i) csv << "," << z(i, col);
    csv << "\n";
  }
  std::cout << j.dump(2) << "\n";
  std::cout << "wrote " << out_json << ", " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GET: geometry-aware transfer for unsupervised domain adaptation"};
  app.require_subcommand(1);

  std::string config_path;
  RunConfig flag_cfg;  // flag values land here, then override the file config

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", flag_cfg.seed, "master seed (all randomness derives from it)");
    sub->add_option("--out-dir", flag_cfg.out_dir, "output directory (default: out)");
  };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write source.csv/target.csv for the synthetic benchmark");
  add_common(gen);
  gen->add_option("--k", flag_cfg.synth.num_classes, "class count (default 3)");
  gen->add_option("--input-dim", flag_cfg.synth.input_dim, "raw feature dimension D (default 10)");
  gen->add_option("--samples-per-class", flag_cfg.synth.samples_per_class,
                  "samples per class per domain (default 60)");
  gen->add_option("--separation", flag_cfg.synth.separation, "cluster center distance (default 1.2)");
  gen->add_option("--rotation", flag_cfg.synth.rotation_angle,
                  "target rotation budget in radians (default pi/6)");
  gen->add_option("--translation", flag_cfg.synth.translation, "target translation magnitude");
  gen->add_option("--noise", flag_cfg.synth.noise, "cluster noise scale (default 0.3)");

  // train
  auto* tr = app.add_subcommand("train", "run warm-up + GET stages, write model/history/metrics");
  add_common(tr);
  int repeats = 1;
  tr->add_option("--repeats", repeats, "independent repeats; seed + index each (default 1)");
  tr->add_option("--t-warm", flag_cfg.train.t_warm, "warm-up epochs (default 20)");
  tr->add_option("--t-adapt", flag_cfg.train.t_adapt, "GET epochs (default 1000)");
  tr->add_option("--batch-size", flag_cfg.train.batch_size, "batch size (default 64)");
  tr->add_option("--lr", flag_cfg.train.learning_rate, "ADAM learning rate (default 1e-3)");
  tr->add_option("--lambda-dc", flag_cfg.train.lambda_dc, "domain coherence weight");
  tr->add_option("--lambda-co", flag_cfg.train.lambda_co, "class orthogonality weight");
  tr->add_option("--lambda-t", flag_cfg.train.lambda_t, "target entropy weight (default 1e-3)");
  tr->add_option("--tau", flag_cfg.train.tau, "pseudo-label threshold (default 0.8)");

  // eval
  auto* ev = app.add_subcommand("eval", "accuracy of a checkpoint on a CSV dataset");
  std::string model_path, data_path, eval_out = "eval.json";
  ev->add_option("--model", model_path, "model checkpoint")->required();
  ev->add_option("--data", data_path, "dataset CSV")->required();
  ev->add_option("--out", eval_out, "output JSON path (default eval.json)");

  // verify
  auto* vf = app.add_subcommand("verify", "numerical verification of the rank/norm bounds");
  std::uint64_t vseed = 7;
  long vtrials = 1000;
  std::string verify_out = "verify.json";
  vf->add_option("--seed", vseed, "seed (default 7)");
  vf->add_option("--trials", vtrials, "Monte-Carlo trials per bound (default 1000)");
  vf->add_option("--out", verify_out, "output JSON path (default verify.json)");

  // diag
  auto* dg = app.add_subcommand("diag", "geometry diagnostics + projected coordinates");
  std::string diag_json = "diag.json", diag_csv = "projected.csv";
  dg->add_option("--model", model_path, "model checkpoint")->required();
  dg->add_option("--data", data_path, "dataset CSV")->required();
  dg->add_option("--out-json", diag_json, "diagnostics JSON path (default diag.json)");
  dg->add_option("--out-csv", diag_csv, "projected coordinates CSV (default projected.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    // Flags override config-file values, which override defaults.
    auto* sub = app.get_subcommands().front();
    auto overridden = [&](const char* name) {
      const auto* opt = sub->get_option_no_throw(name);
      return opt != nullptr && opt->count() > 0;
    };
    if (overridden("--seed")) cfg.seed = flag_cfg.seed;
    if (overridden("--out-dir")) cfg.out_dir = flag_cfg.out_dir;

    if (gen->parsed()) {
      if (overridden("--k")) cfg.synth.num_classes = flag_cfg.synth.num_classes;
      if (overridden("--input-dim")) cfg.synth.input_dim = flag_cfg.synth.input_dim;
      if (overridden("--samples-per-class"))
        cfg.synth.samples_per_class = flag_cfg.synth.samples_per_class;
      if (overridden("--separation")) cfg.synth.separation = flag_cfg.synth.separation;
      if (overridden("--rotation")) cfg.synth.rotation_angle = flag_cfg.synth.rotation_angle;
      if (overridden("--translation")) cfg.synth.translation = flag_cfg.synth.translation;
      if (overridden("--noise")) cfg.synth.noise = flag_cfg.synth.noise;
      return cmd_gen_data(cfg);
    }
    if (tr->parsed()) {
      if (overridden("--t-warm")) cfg.train.t_warm = flag_cfg.train.t_warm;
      if (overridden("--t-adapt")) cfg.train.t_adapt = flag_cfg.train.t_adapt;
      if (overridden("--batch-size")) cfg.train.batch_size = flag_cfg.train.batch_size;
      if (overridden("--lr")) cfg.train.learning_rate = flag_cfg.train.learning_rate;
      if (overridden("--lambda-dc")) cfg.train.lambda_dc = flag_cfg.train.lambda_dc;
      if (overridden("--lambda-co")) cfg.train.lambda_co = flag_cfg.train.lambda_co;
      if (overridden("--lambda-t")) cfg.train.lambda_t = flag_cfg.train.lambda_t;
      if (overridden("--tau")) cfg.train.tau = flag_cfg.train.tau;
      return cmd_train(cfg, repeats);
    }
    if (ev->parsed()) return cmd_eval(model_path, data_path, eval_out);
    if (vf->parsed()) return cmd_verify(vseed, vtrials, verify_out);
    if (dg->parsed()) return cmd_diag(model_path, data_path, diag_json, diag_csv);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
