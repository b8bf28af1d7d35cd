// Copyright 2026 The UR2M Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The `ur2m` command line: gen-data, search, train, eval, infer, quantize,
// profile and robustness.
//
// Exit codes: 0 success, 1 internal error, 2 usage / configuration,
// 3 data, 4 model format or model/data mismatch, 5 training, 6 I/O.
// Failures print one line to stderr: `error: code=<code> msg=<message>`.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ur2m/ur2m.hpp"

namespace ur2m::cli {

inline constexpr const char* kOutputDirEnv = "UR2M_OUTPUT_DIR";

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kData = 3,
  kModel = 4,
  kTraining = 5,
  kIo = 6,
};

inline int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) return kUsage;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return kData;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const ModelMismatchError*>(&e)) return kModel;
  if (dynamic_cast<const TrainingError*>(&e)) return kTraining;
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  return kInternal;
}

inline void print_error(std::ostream& err, const std::string& code, std::string msg) {
  for (auto& ch : msg) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  err << "error: code=" << code << " msg=" << msg << '\n';
}

namespace detail {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline void write_text(const fs::path& path, const std::string& text) { io::write_file(path, text); }

inline void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// TOML-style snapshot of every option of a subcommand after parsing,
// readable back through --config.
inline std::string snapshot(const CLI::App& sub) {
  std::ostringstream os;
  os << "[" << sub.get_name() << "]\n";
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->get_type_size() == 0) {
      os << name << " = " << (opt->count() > 0 ? "true" : "false") << '\n';
      continue;
    }
    std::vector<std::string> vals = opt->results();
    if (vals.empty() && !opt->get_default_str().empty()) vals.push_back(opt->get_default_str());
    if (vals.empty()) continue;
    std::string joined;
    for (std::size_t i = 0; i < vals.size(); ++i) joined += (i ? "," : "") + vals[i];
    os << name << " = \"" << joined << "\"\n";
  }
  return os.str();
}

struct Common {
  std::string output_dir;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-o,--output-dir", c.output_dir,
                  std::string("Directory for outputs (default: $") + kOutputDirEnv + " or ./ur2m_out)");
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--jobs", c.jobs, "Worker threads (1 = reproducible single-threaded)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

inline fs::path resolve_output(const Common& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "ur2m_out";
}

struct TrainFlags {
  std::size_t epochs = 30;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::size_t patience = 5;
  double lambda = 0.1;
  std::size_t anneal = 10;

  void add(CLI::App* sub) {
    sub->add_option("--epochs", epochs, "Maximum epochs per training phase")->capture_default_str();
    sub->add_option("--batch-size", batch, "Mini-batch size")->capture_default_str();
    sub->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    sub->add_option("--patience", patience, "Early-stopping patience in epochs")->capture_default_str();
    sub->add_option("--lambda", lambda, "Entropy regularizer weight")->capture_default_str();
    sub->add_option("--anneal-epochs", anneal, "Epochs of the linear ramp of the regularizer weight")
        ->capture_default_str();
  }

  train::TrainHyper hyper(std::uint64_t seed) const {
    train::TrainHyper h;
    h.max_epochs = epochs;
    h.batch_size = batch;
    h.lr = lr;
    h.patience = patience;
    h.seed = seed;
    h.loss.lambda = lambda;
    h.loss.anneal_epochs = anneal;
    return h;
  }
};

struct PolicyFlags {
  double tau = 0.0;
  std::string rule = "all_heads";

  void add(CLI::App* sub) {
    sub->add_option("--tau", tau, "Uncertainty threshold in [0,1]; exit when u <= tau")
        ->capture_default_str();
    sub->add_option("--rule", rule, "Exit rule: all_heads | any_head | per_head")->capture_default_str();
  }
  runtime::ExitPolicy policy() const {
    runtime::ExitPolicy p{tau, runtime::parse_rule(rule)};
    p.validate();
    return p;
  }
};

inline data::Corruption parse_corruption(const std::string& s) {
  if (s == "gaussian") return data::Corruption::kGaussian;
  if (s == "zero_mask") return data::Corruption::kZeroMask;
  throw ConfigError("unknown corruption '" + s + "' (expected gaussian|zero_mask)");
}

inline data::Dataset load_data(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--data is required");
  return data::load_dataset(dir);
}

inline void check_events(const BackboneConfig& cfg, const data::Dataset& ds) {
  if (cfg.events != ds.event_count()) {
    throw ModelMismatchError("model has " + std::to_string(cfg.events) + " events, dataset has " +
                             std::to_string(ds.event_count()));
  }
}

}  // namespace detail

// Builds the parser; `dispatch` runs the selected subcommand.
class Cli {
 public:
  Cli() : app_("ur2m: uncertainty-aware multi-event detection with early-exit evidential cascades") {
    app_.name("ur2m");
    app_.require_subcommand(1);
    app_.set_config("--config", "", "Read options from a TOML file; command-line flags take precedence");
    app_.set_version_flag("--version", "ur2m 1.0.0");
    build_gen_data();
    build_search();
    build_train();
    build_eval();
    build_infer();
    build_quantize();
    build_profile();
    build_robustness();
  }

  CLI::App& app() { return app_; }

  int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
      app_.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << help_for_parsed();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app_.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::CallForVersion&) {
      out << app_.version() << '\n';
      return kOk;
    } catch (const CLI::ParseError& e) {
      print_error(err, "usage", e.what());
      return kUsage;
    }
    try {
      dispatch(out);
      return kOk;
    } catch (const Error& e) {
      print_error(err, e.code(), e.what());
      return exit_code_for(e);
    } catch (const nlohmann::json::exception& e) {
      print_error(err, "format", e.what());
      return kModel;
    } catch (const std::filesystem::filesystem_error& e) {
      print_error(err, "io", e.what());
      return kIo;
    } catch (const std::exception& e) {
      print_error(err, "internal", e.what());
      return kInternal;
    }
  }

 private:
  CLI::App app_;
  CLI::App* gen_ = nullptr;
  CLI::App* search_ = nullptr;
  CLI::App* train_ = nullptr;
  CLI::App* eval_ = nullptr;
  CLI::App* infer_ = nullptr;
  CLI::App* quantize_ = nullptr;
  CLI::App* profile_ = nullptr;
  CLI::App* robust_ = nullptr;

  // gen-data
  detail::Common gen_common_;
  data::SyntheticConfig gen_cfg_;
  std::size_t gen_test_ = 200;
  // search
  detail::Common search_common_;
  detail::TrainFlags search_train_;
  std::string search_data_;
  std::vector<std::size_t> search_channels_{kChannelGrid.begin(), kChannelGrid.end()};
  std::vector<std::size_t> search_ops_{kBlockGrid.begin(), kBlockGrid.end()};
  bool search_override_ = false;
  std::string search_denominator_ = "macs";
  // train
  detail::Common train_common_;
  detail::TrainFlags train_flags_;
  std::string train_data_;
  std::string train_arch_;
  std::size_t train_channels_ = 32;
  std::size_t train_ops_ = 3;
  bool train_override_ = false;
  bool train_no_freeze_ = false;
  std::string train_baseline_ = "none";
  std::size_t train_smote_ = 0;
  // eval
  detail::Common eval_common_;
  detail::PolicyFlags eval_policy_;
  std::vector<std::string> eval_models_;
  std::string eval_data_;
  std::string eval_corruption_ = "none";
  double eval_level_ = 0.0;
  // infer
  detail::Common infer_common_;
  detail::PolicyFlags infer_policy_;
  std::string infer_model_;
  std::string infer_data_;
  std::string infer_split_ = "test";
  // quantize
  detail::Common quant_common_;
  std::string quant_model_;
  std::string quant_data_;
  std::size_t quant_calib_ = 100;
  // profile
  detail::Common profile_common_;
  std::string profile_model_;
  std::string profile_data_;
  std::string profile_grid_ = "0:1:0.1";
  std::string profile_rule_ = "all_heads";
  // robustness
  detail::Common robust_common_;
  detail::PolicyFlags robust_policy_;
  std::string robust_model_;
  std::string robust_data_;
  std::string robust_corruption_ = "gaussian";
  std::vector<double> robust_levels_{0.0, 1.0, 3.0};

  std::string help_for_parsed() const {
    for (const CLI::App* sub : app_.get_subcommands()) return sub->help();
    return app_.help();
  }

  void build_gen_data() {
    gen_ = app_.add_subcommand("gen-data", "Generate a synthetic multi-event dataset (manifest + CSV)");
    detail::add_common(gen_, gen_common_);
    gen_->add_option("--events", gen_cfg_.events, "Number of event classes (>= 2)")->capture_default_str();
    gen_->add_option("--n", gen_cfg_.n_per_event, "Training samples per event")->capture_default_str();
    gen_->add_option("--test-count", gen_test_, "Test samples in total (labels round-robin)")
        ->capture_default_str();
    gen_->add_option("--snr-min", gen_cfg_.snr_db_min, "Lowest per-sample SNR in dB")->capture_default_str();
    gen_->add_option("--snr-max", gen_cfg_.snr_db_max, "Highest per-sample SNR in dB (inf: noise-free)")
        ->capture_default_str();
    gen_->add_option("--sample-rate", gen_cfg_.sample_rate, "Sample rate in Hz")->capture_default_str();
    gen_->add_option("--duration", gen_cfg_.duration_s, "Signal duration in seconds")->capture_default_str();
    gen_->add_option("--frequencies", gen_cfg_.frequencies,
                     "Comma-separated tone frequency per event in Hz (default 250*(c+1))")
        ->delimiter(',');
  }

  void build_search() {
    search_ = app_.add_subcommand("search", "Exhaustive channels x blocks search scored by accuracy per cost");
    detail::add_common(search_, search_common_);
    search_train_.add(search_);
    search_->add_option("--data", search_data_, "Dataset directory")->required();
    search_->add_option("--channels", search_channels_, "Comma-separated channel widths L")
        ->delimiter(',')
        ->capture_default_str();
    search_->add_option("--ops", search_ops_, "Comma-separated block counts O")
        ->delimiter(',')
        ->capture_default_str();
    search_->add_flag("--override-grid", search_override_, "Allow L and O outside the search grid");
    search_->add_option("--score-denominator", search_denominator_,
                        "Cost in the score: macs (estimated MACs) | blocks (block count)")
        ->capture_default_str();
  }

  void build_train() {
    train_ = app_.add_subcommand("train", "Train a cascade model (stage-wise) or a softmax baseline");
    detail::add_common(train_, train_common_);
    train_flags_.add(train_);
    train_->add_option("--data", train_data_, "Dataset directory")->required();
    train_->add_option("--arch", train_arch_, "best_config.json from `search` (overrides --channels/--ops)");
    train_->add_option("--channels", train_channels_, "Channel width L")->capture_default_str();
    train_->add_option("--ops", train_ops_, "Block count O")->capture_default_str();
    train_->add_flag("--override-grid", train_override_, "Allow L and O outside the search grid");
    train_->add_flag("--no-freeze", train_no_freeze_,
                     "Train stages 0..s jointly in phase s instead of freezing earlier stages");
    train_->add_option("--baseline", train_baseline_,
                       "none (evidential cascade) | softmax_single | deep_ensemble | input_aug")
        ->capture_default_str();
    train_->add_option("--smote-to", train_smote_,
                       "Upsample every event's training positives to this count (0: off)")
        ->capture_default_str();
  }

  void build_eval() {
    eval_ = app_.add_subcommand("eval", "Calibration report (accuracy, Brier, NLL, ECE) for one or more models");
    detail::add_common(eval_, eval_common_);
    eval_policy_.add(eval_);
    eval_->add_option("--model", eval_models_, "Model file(s) (.ucm); repeat to compare systems")->required();
    eval_->add_option("--data", eval_data_, "Dataset directory (test split is evaluated)")->required();
    eval_->add_option("--corruption", eval_corruption_, "none | gaussian | zero_mask")->capture_default_str();
    eval_->add_option("--level", eval_level_,
                      "Corruption level: gaussian sigma as a multiple of signal RMS, or masked fraction")
        ->capture_default_str();
  }

  void build_infer() {
    infer_ = app_.add_subcommand("infer", "Early-exit inference; writes a per-sample trace CSV");
    detail::add_common(infer_, infer_common_);
    infer_policy_.add(infer_);
    infer_->add_option("--model", infer_model_, "Cascade model (.ucm, float or int8)")->required();
    infer_->add_option("--data", infer_data_, "Dataset directory")->required();
    infer_->add_option("--split", infer_split_, "train | test")->capture_default_str();
  }

  void build_quantize() {
    quantize_ = app_.add_subcommand("quantize", "Post-training int8 quantization with calibration");
    detail::add_common(quantize_, quant_common_);
    quantize_->add_option("--model", quant_model_, "Float cascade model (.ucm)")->required();
    quantize_->add_option("--data", quant_data_, "Dataset directory (train split calibrates, test split scores)")
        ->required();
    quantize_->add_option("--calib-count", quant_calib_, "Calibration samples taken from the train split")
        ->capture_default_str();
  }

  void build_profile() {
    profile_ = app_.add_subcommand("profile", "Threshold sweep: exit rates, mean MACs, accuracy, NLL per tau");
    detail::add_common(profile_, profile_common_);
    profile_->add_option("--model", profile_model_, "Cascade model (.ucm)")->required();
    profile_->add_option("--data", profile_data_, "Dataset directory (test split)")->required();
    profile_->add_option("--tau-grid", profile_grid_, "start:stop:step within [0,1]")->capture_default_str();
    profile_->add_option("--rule", profile_rule_, "Exit rule: all_heads | any_head | per_head")
        ->capture_default_str();
  }

  void build_robustness() {
    robust_ = app_.add_subcommand("robustness", "Accuracy and uncertainty under signal corruption");
    detail::add_common(robust_, robust_common_);
    robust_policy_.add(robust_);
    robust_->add_option("--model", robust_model_, "Cascade model (.ucm)")->required();
    robust_->add_option("--data", robust_data_, "Dataset directory (test split)")->required();
    robust_->add_option("--corruption", robust_corruption_, "gaussian | zero_mask")->capture_default_str();
    robust_->add_option("--levels", robust_levels_,
                        "Comma-separated levels starting at 0 (gaussian: x signal RMS; zero_mask: fraction)")
        ->delimiter(',')
        ->capture_default_str();
  }

  void dispatch(std::ostream& out) {
    if (gen_->parsed()) return run_gen_data(out);
    if (search_->parsed()) return run_search(out);
    if (train_->parsed()) return run_train(out);
    if (eval_->parsed()) return run_eval(out);
    if (infer_->parsed()) return run_infer(out);
    if (quantize_->parsed()) return run_quantize(out);
    if (profile_->parsed()) return run_profile(out);
    if (robust_->parsed()) return run_robustness(out);
    throw ConfigError("no subcommand given");
  }

  static void snapshot(const CLI::App* sub, const std::filesystem::path& dir) {
    detail::write_text(dir / (sub->get_name() + ".config.toml"), detail::snapshot(*sub));
  }

  void run_gen_data(std::ostream& out) {
    const auto dir = detail::resolve_output(gen_common_);
    auto cfg = gen_cfg_;
    cfg.seed = gen_common_.seed;
    cfg.test_count = gen_test_;
    const auto ds = data::gen_synthetic(cfg);
    data::save_dataset(ds, dir);
    snapshot(gen_, dir);
    out << "wrote dataset (" << ds.indices(data::Split::kTrain).size() << " train, "
        << ds.indices(data::Split::kTest).size() << " test) to " << dir.string() << '\n';
  }

  void run_search(std::ostream& out) {
    const auto dir = detail::resolve_output(search_common_);
    const auto ds = detail::load_data(search_data_);
    const auto pipeline = fit_pipeline(ds, signal::FeatureConfig{});
    const auto train_set = featurize(ds, data::Split::kTrain, pipeline);
    BackboneConfig base;
    base.input_shape = pipeline.input_shape(ds.signal_len);
    base.events = ds.event_count();
    base.off_grid = search_override_;
    search::SearchSpace space{search_channels_, search_ops_};
    const auto hyper = search_train_.hyper(search_common_.seed);
    const auto result = search::run_search(space, base, search::training_evaluator(train_set, hyper),
                                           search::parse_denominator(search_denominator_),
                                           search_common_.jobs, search_common_.seed);
    std::ostringstream csv;
    search::write_table_csv(csv, result);
    detail::write_text(dir / "search_table.csv", csv.str());
    detail::Json best;
    best["config"] = result.best_config();
    best["accuracy"] = result.table[result.best].accuracy;
    best["macs"] = result.table[result.best].macs;
    best["score"] = result.table[result.best].score;
    best["score_denominator"] = search::to_string(result.denominator);
    best["seed"] = result.seed;
    detail::write_json(dir / "best_config.json", best);
    snapshot(search_, dir);
    out << "best: L=" << result.best_config().channels << " O=" << result.best_config().blocks
        << " score=" << fmt_real(result.table[result.best].score) << '\n';
  }

  void run_train(std::ostream& out) {
    const auto dir = detail::resolve_output(train_common_);
    auto ds = detail::load_data(train_data_);
    if (train_smote_ > 0) {
      for (std::size_t c = 0; c < ds.event_count(); ++c) {
        ds = data::smote_upsample(ds, c, train_smote_, 5, train_common_.seed + c);
      }
    }
    const auto pipeline = fit_pipeline(ds, signal::FeatureConfig{});
    const auto train_set = featurize(ds, data::Split::kTrain, pipeline);
    BackboneConfig cfg;
    if (!train_arch_.empty()) {
      const auto j = nlohmann::json::parse(io::read_file(train_arch_));
      cfg = backbone_from_json(j.contains("config") ? j.at("config") : j);
    } else {
      cfg = BackboneConfig::make(train_channels_, train_ops_, {}, ds.event_count(), train_override_);
    }
    cfg.input_shape = pipeline.input_shape(ds.signal_len);
    detail::check_events(cfg, ds);
    cfg.validate();
    auto hyper = train_flags_.hyper(train_common_.seed);
    hyper.freeze = !train_no_freeze_;

    detail::Json report;
    report["config"] = cfg;
    if (train_baseline_ == "none") {
      auto model = build_model<float>(cfg, train_common_.seed);
      model.pipeline = pipeline;
      const auto rep = train::cascade_train(model, train_set, hyper);
      io::write_file(dir / "model.ucm", io::serialize(model));
      report["kind"] = "ur2m";
      report["freeze"] = hyper.freeze;
      report["phases"] = detail::Json::array();
      for (const auto& p : rep.phases) {
        report["phases"].push_back({{"phase", p.phase},
                                    {"epochs_run", p.epochs_run},
                                    {"best_epoch", p.best_epoch},
                                    {"best_val_accuracy", p.best_val_accuracy},
                                    {"best_val_loss", p.best_val_loss},
                                    {"stopped_early", p.stopped_early}});
      }
      report["param_count"] = model.param_count();
      out << "wrote " << (dir / "model.ucm").string() << '\n';
    } else {
      const auto kind = baseline::parse_kind(train_baseline_);
      const auto bundle = baseline::train_baseline(kind, cfg, pipeline, train_set, hyper);
      const auto name = "baseline_" + train_baseline_ + ".ucm";
      io::write_file(dir / name, io::serialize(bundle));
      report["kind"] = train_baseline_;
      report["members"] = bundle.members.size();
      report["param_count"] = bundle.param_count();
      out << "wrote " << (dir / name).string() << '\n';
    }
    detail::write_json(dir / "train_report.json", report);
    snapshot(train_, dir);
  }

  eval::SignalSet eval_set(const data::Dataset& ds, data::Split split, const std::string& corruption,
                           double level, std::uint64_t seed) const {
    auto set = eval::signals_of(ds, split);
    if (corruption == "none" || level == 0.0) return set;
    return eval::corrupt_all(set, {detail::parse_corruption(corruption), level}, seed);
  }

  void run_eval(std::ostream& out) {
    const auto dir = detail::resolve_output(eval_common_);
    const auto ds = detail::load_data(eval_data_);
    const auto set = eval_set(ds, data::Split::kTest, eval_corruption_, eval_level_, eval_common_.seed);
    const auto policy = eval_policy_.policy();
    std::vector<eval::SystemReport> reports;
    for (const auto& path : eval_models_) {
      const auto f = io::load(path);
      switch (f.kind()) {
        case io::ModelKind::kCascade: {
          const auto m = io::deserialize_cascade(f);
          detail::check_events(m.config, ds);
          reports.push_back(eval::evaluate_cascade(m, set, policy));
          break;
        }
        case io::ModelKind::kQuantized: {
          const auto q = io::deserialize_quantized(f);
          detail::check_events(q.model.backbone_config(), ds);
          auto r = eval::evaluate_cascade(q.model, eval::features_of(q.pipeline, set), set.labels, policy);
          r.kind = "ur2m_int8";
          reports.push_back(std::move(r));
          break;
        }
        case io::ModelKind::kBaseline: {
          const auto b = io::deserialize_baseline(f);
          detail::check_events(b.members.front().backbone.config, ds);
          reports.push_back(eval::evaluate_baseline(b, set));
          break;
        }
      }
    }
    detail::Json j;
    j["corruption"] = eval_corruption_;
    j["level"] = eval_level_;
    j["tau"] = policy.tau;
    j["rule"] = runtime::to_string(policy.rule);
    j["systems"] = detail::Json::array();
    for (const auto& r : reports) j["systems"].push_back(eval::to_json(r));
    detail::write_json(dir / "eval_report.json", j);
    std::ostringstream csv;
    eval::write_reports_csv(csv, reports);
    detail::write_text(dir / "eval_report.csv", csv.str());
    snapshot(eval_, dir);
    for (const auto& r : reports) {
      out << r.kind << ": accuracy=" << fmt_fixed(r.pooled.accuracy, 4) << " nll=" << fmt_fixed(r.pooled.nll, 4)
          << " ece=" << fmt_fixed(r.pooled.ece, 4) << '\n';
    }
  }

  // Float or int8 cascade behind one interface.
  struct LoadedCascade {
    std::optional<CascadeModel<float>> fp;
    std::optional<io::QuantizedFile> q;
    const InputPipeline& pipeline() const { return fp ? fp->pipeline : q->pipeline; }
    const BackboneConfig& config() const { return fp ? fp->config : q->model.backbone_config(); }
    runtime::InferenceTrace infer(const std::vector<Tensor<float>>& x, const runtime::ExitPolicy& p) const {
      return fp ? runtime::infer_with_exits(*fp, x, p) : runtime::infer_with_exits(q->model, x, p);
    }
  };

  static LoadedCascade load_cascade(const std::string& path) {
    const auto f = io::load(path);
    LoadedCascade l;
    if (f.kind() == io::ModelKind::kQuantized) {
      l.q = io::deserialize_quantized(f);
    } else {
      l.fp = io::deserialize_cascade(f);
    }
    return l;
  }

  void run_infer(std::ostream& out) {
    const auto dir = detail::resolve_output(infer_common_);
    const auto ds = detail::load_data(infer_data_);
    data::Split split;
    if (infer_split_ == "test") {
      split = data::Split::kTest;
    } else if (infer_split_ == "train") {
      split = data::Split::kTrain;
    } else {
      throw ConfigError("--split must be train or test");
    }
    const auto model = load_cascade(infer_model_);
    detail::check_events(model.config(), ds);
    const auto set = eval::signals_of(ds, split);
    const auto policy = infer_policy_.policy();
    const auto trace = model.infer(eval::features_of(model.pipeline(), set), policy);
    std::ostringstream csv;
    runtime::write_trace_csv(csv, trace, model.config().events);
    detail::write_text(dir / "trace.csv", csv.str());
    detail::Json j;
    j["tau"] = policy.tau;
    j["rule"] = runtime::to_string(policy.rule);
    j["samples"] = trace.samples.size();
    j["exit_rates"] = trace.exit_rates();
    j["mean_macs"] = trace.mean_macs();
    detail::write_json(dir / "trace_summary.json", j);
    snapshot(infer_, dir);
    out << "wrote " << (dir / "trace.csv").string() << " (mean MACs " << fmt_fixed(trace.mean_macs(), 1) << ")\n";
  }

  void run_quantize(std::ostream& out) {
    const auto dir = detail::resolve_output(quant_common_);
    const auto ds = detail::load_data(quant_data_);
    const auto model = io::deserialize_cascade(io::load(quant_model_));
    detail::check_events(model.config, ds);
    const auto train_set = eval::signals_of(ds, data::Split::kTrain);
    if (quant_calib_ == 0) throw ConfigError("--calib-count must be >= 1");
    std::vector<Tensor<float>> calib;
    const std::size_t stride = std::max<std::size_t>(1, train_set.size() / quant_calib_);
    for (std::size_t i = 0; i < train_set.size() && calib.size() < quant_calib_; i += stride) {
      calib.push_back(model.pipeline(train_set.signals[i]));
    }
    const auto q = quant::quantize_model(model, calib);
    io::write_file(dir / "model_int8.ucm", io::serialize(q, model.pipeline));

    const auto test = eval::signals_of(ds, data::Split::kTest);
    const auto feats = eval::features_of(model.pipeline, test);
    const runtime::ExitPolicy deep{0.0, runtime::ExitRule::kAllHeads};
    const auto rf = eval::evaluate_cascade(runtime::FloatRunner{model}, feats, test.labels, deep);
    const auto rq = eval::evaluate_cascade(q, feats, test.labels, deep);
    std::size_t agree = 0, total = 0;
    for (std::size_t i = 0; i < rf.decisions.size(); ++i) {
      for (std::size_t c = 0; c < rf.decisions[i].size(); ++c) {
        agree += rf.decisions[i][c].predicted == rq.decisions[i][c].predicted;
        ++total;
      }
    }
    const auto cf = cost::estimate_memory(model);
    const auto cq = cost::estimate_memory(q);
    detail::Json j;
    j["calibration_samples"] = calib.size();
    j["f32_accuracy"] = rf.pooled.accuracy;
    j["int8_accuracy"] = rq.pooled.accuracy;
    j["accuracy_drop"] = rf.pooled.accuracy - rq.pooled.accuracy;
    j["agreement"] = total ? static_cast<double>(agree) / static_cast<double>(total) : 1.0;
    j["f32_param_bytes"] = cf.param_bytes;
    j["int8_weight_bytes"] = q.int8_weight_bytes();
    j["int8_total_param_bytes"] = cq.param_bytes;
    j["f32_peak_activation_bytes"] = cf.peak_activation_bytes;
    j["int8_peak_activation_bytes"] = cq.peak_activation_bytes;
    detail::write_json(dir / "quantize_report.json", j);
    snapshot(quantize_, dir);
    out << "int8 accuracy " << fmt_fixed(rq.pooled.accuracy, 4) << " (f32 " << fmt_fixed(rf.pooled.accuracy, 4)
        << "), wrote " << (dir / "model_int8.ucm").string() << '\n';
  }

  void run_profile(std::ostream& out) {
    const auto dir = detail::resolve_output(profile_common_);
    const auto ds = detail::load_data(profile_data_);
    const auto model = io::deserialize_cascade(io::load(profile_model_));
    detail::check_events(model.config, ds);
    const auto test = eval::signals_of(ds, data::Split::kTest);
    const auto rows = eval::exit_profile(model, eval::features_of(model.pipeline, test), test.labels,
                                         eval::parse_tau_grid(profile_grid_),
                                         runtime::parse_rule(profile_rule_), profile_common_.jobs);
    std::ostringstream csv;
    eval::write_profile_csv(csv, rows);
    detail::write_text(dir / "profile.csv", csv.str());
    detail::Json j;
    j["rule"] = profile_rule_;
    j["cost"] = {{"param_bytes", cost::estimate_memory(model).param_bytes},
                 {"peak_activation_bytes", cost::estimate_memory(model).peak_activation_bytes}};
    j["rows"] = eval::profile_json(rows);
    detail::write_json(dir / "profile.json", j);
    snapshot(profile_, dir);
    out << "wrote " << rows.size() << " rows to " << (dir / "profile.csv").string() << '\n';
  }

  void run_robustness(std::ostream& out) {
    const auto dir = detail::resolve_output(robust_common_);
    const auto ds = detail::load_data(robust_data_);
    const auto model = io::deserialize_cascade(io::load(robust_model_));
    detail::check_events(model.config, ds);
    const auto mode = detail::parse_corruption(robust_corruption_);
    std::vector<eval::CorruptionLevel> grid;
    for (double l : robust_levels_) grid.push_back({mode, l});
    const auto rep = eval::robustness_eval(model, eval::signals_of(ds, data::Split::kTest), grid,
                                           robust_policy_.policy(), robust_common_.seed);
    detail::write_json(dir / "robustness.json", eval::to_json(rep));
    snapshot(robust_, dir);
    for (const auto& l : rep.levels) {
      out << robust_corruption_ << " " << fmt_real(l.corruption.level) << ": accuracy="
          << fmt_fixed(l.accuracy, 4) << " mean_u=" << fmt_fixed(l.mean_uncertainty, 4) << '\n';
    }
  }
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  Cli cli;
  return cli.run(argc, argv, out, err);
}

}  // namespace ur2m::cli
