#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agbada/data/augment.hpp"
#include "agbada/data/batches.hpp"
#include "agbada/data/image.hpp"
#include "agbada/data/index.hpp"
#include "agbada/data/split.hpp"
#include "agbada/errors.hpp"
#include "agbada/eval.hpp"
#include "agbada/kernels.hpp"
#include "agbada/model.hpp"
#include "agbada/plots.hpp"
#include "agbada/train.hpp"
#include "agbada/weights_io.hpp"

namespace agbada::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kIoError = 3, kNonFinite = 4 };

struct RunConfig {
  std::string data_dir;
  std::string index_csv;  // defaults to <data_dir>/index.csv
  std::size_t input_size = 180;
  std::size_t batch_size = 128;
  int epochs = 50;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  data::AugmentConfig augment;
  ReduceLrConfig reduce_lr;
  EarlyStopConfig early_stop;
  std::size_t unfreeze_k = 4;
  double dropout_rate = 0.5;
  std::string pretrained_weights;
  std::string out_dir = "out";
  std::string arch = "vgg16";  // or "width:convs,width:convs,..."

  std::string index_path() const {
    if (!index_csv.empty()) return index_csv;
    return (std::filesystem::path(data_dir) / "index.csv").string();
  }
};

// "vgg16" or a comma list of width:convs block specs.
inline std::vector<BlockSpec> parse_arch(const std::string& arch) {
  if (arch == "vgg16") return vgg16_blocks();
  std::vector<BlockSpec> blocks;
  std::stringstream ss(arch);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument(item);
      std::size_t used = 0;
      const std::string w = item.substr(0, colon), c = item.substr(colon + 1);
      BlockSpec b;
      b.width = std::stoul(w, &used);
      if (used != w.size()) throw std::invalid_argument(item);
      b.convs = std::stoul(c, &used);
      if (used != c.size()) throw std::invalid_argument(item);
      if (b.width == 0 || b.convs == 0) throw std::invalid_argument(item);
      blocks.push_back(b);
    } catch (const std::exception&) {
      throw ParameterError("bad --arch block '" + item + "' (expected width:convs)");
    }
  }
  if (blocks.empty()) throw ParameterError("empty --arch");
  return blocks;
}

inline SequentialModel<float> build_model(const RunConfig& cfg) {
  auto base = build_vgg_base<float>({3, cfg.input_size, cfg.input_size}, parse_arch(cfg.arch));
  auto model = build_gender_classifier(std::move(base), cfg.dropout_rate);
  initialize_he(model, cfg.seed);
  return model;
}

inline TrainConfig train_config(const RunConfig& cfg, const std::string& checkpoint) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.reduce_lr = cfg.reduce_lr;
  tc.early_stop = cfg.early_stop;
  tc.checkpoint_path = checkpoint;
  tc.seed = cfg.seed;
  return tc;
}

inline void validate(const RunConfig& cfg, bool needs_data) {
  if (needs_data && cfg.data_dir.empty()) throw ParameterError("--data-dir is required");
  if (cfg.epochs < 1) throw ParameterError("--epochs must be >= 1");
  if (cfg.batch_size < 1) throw ParameterError("--batch-size must be >= 1");
  if (cfg.input_size < 1) throw ParameterError("--input-size must be >= 1");
  if (cfg.out_dir.empty()) throw ParameterError("--out-dir must not be empty");
  validate_dropout_rate(cfg.dropout_rate);
  cfg.augment.validate();
  train_config(cfg, "").validate();
  parse_arch(cfg.arch);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::filesystem::path prepare_out_dir(const RunConfig& cfg) {
  std::filesystem::path out(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());
  return out;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& log) {
  validate(cfg, true);
  const auto rows = data::load_index(cfg.index_path());
  if (rows.empty()) throw ValidationError("index '" + cfg.index_path() + "' has no rows");
  const auto out = prepare_out_dir(cfg);

  const auto split = data::stratified_split(rows, cfg.seed);
  data::save_split(split, (out / "split.json").string());

  auto model = build_model(cfg);
  if (!cfg.pretrained_weights.empty()) load_weights(model, cfg.pretrained_weights, false);
  set_trainable(model, TrainablePolicy::last_k_convs(cfg.unfreeze_k));
  log << "model: " << model.layers.size() << " layers, " << parameter_count(model) << " parameters ("
      << trainable_parameter_count(model) << " trainable)\n";
  log << "split: train " << split.train.size() << ", val " << split.val.size() << ", test " << split.test.size() << "\n";

  data::ImageCache images(cfg.data_dir, rows, cfg.input_size, cfg.input_size);
  data::BatchStream train(rows, split.train, images.loader(), {cfg.batch_size, true, cfg.seed, cfg.augment});
  data::BatchStream val(rows, split.val, images.loader(), {cfg.batch_size, false, cfg.seed, std::nullopt});

  const auto best_path = out / "best.weights";
  ParameterSet<float> last_epoch;
  const auto result = run_training(model, train, val, train_config(cfg, best_path.string()),
                                   [&](const EpochRecord& r, const CallbackDecision& d) {
                                     char line[160];
                                     std::snprintf(line, sizeof(line),
                                                   "epoch %d  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f  lr %.2g%s%s",
                                                   r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.lr,
                                                   d.save_checkpoint ? "  [checkpoint]" : "", d.stop ? "  [stop]" : "");
                                     log << line << '\n';
                                     last_epoch = snapshot(model);
                                   });

  auto final_model = model;
  restore(final_model, last_epoch);
  save_weights(final_model, (out / "final.weights").string());
  write_text(out / "history.csv", export_history(result.history));
  const auto plots = render_history_plots(result.history);
  write_text(out / "loss.svg", plots.loss);
  write_text(out / "accuracy.svg", plots.accuracy);
  write_text(out / "distribution.svg", render_distribution_pie(data::class_distribution(rows)));
  log << "best epoch " << result.best_epoch << " (val_loss " << result.best_val_loss << ")"
      << (result.stopped_early ? ", stopped early" : "") << "\n";
  return kOk;
}

inline int cmd_evaluate(const RunConfig& cfg, const std::string& weights, std::ostream& log) {
  validate(cfg, true);
  const auto rows = data::load_index(cfg.index_path());
  const auto out = std::filesystem::path(cfg.out_dir);
  const auto split_path = out / "split.json";
  const auto split =
      std::filesystem::exists(split_path) ? data::load_split(split_path.string()) : data::stratified_split(rows, cfg.seed);
  for (auto r : split.test)
    if (r >= rows.size()) throw ValidationError("split.json does not match the index (row " + std::to_string(r) + ")");

  auto model = build_model(cfg);
  load_weights(model, weights.empty() ? (out / "best.weights").string() : weights, true);

  data::ImageCache images(cfg.data_dir, rows, cfg.input_size, cfg.input_size);
  const auto result = evaluate_model(model, rows, split.test, images.loader(), cfg.batch_size);
  prepare_out_dir(cfg);
  const std::string report = render_report(result.report);
  write_text(out / "report.txt", report);
  write_text(out / "confusion.txt", render_confusion(result.confusion));
  write_text(out / "confusion.svg", render_confusion_svg(result.confusion));
  char line[96];
  std::snprintf(line, sizeof(line), "loss %.4f  accuracy %.4f\n", result.loss, result.report.accuracy);
  log << line << '\n' << report;
  return kOk;
}

inline int cmd_predict(const RunConfig& cfg, const std::string& weights, const std::string& image, std::ostream& log) {
  validate(cfg, false);
  auto model = build_model(cfg);
  load_weights(model, weights, true);
  const auto img = data::load_image(image, cfg.input_size, cfg.input_size);
  const auto x = img.reshaped({1, 3, cfg.input_size, cfg.input_size});
  const auto pred = predict(model, x).front();
  char line[128];
  std::snprintf(line, sizeof(line), "%s\t%.4f\n", pred.label.c_str(), pred.probability);
  log << line;
  return kOk;
}

inline int cmd_inspect_weights(const std::string& path, std::ostream& log) {
  const auto entries = read_weight_file(path);
  std::size_t total = 0;
  for (const auto& e : entries) {
    log << e.name << '\t' << shape_string(e.shape) << '\t' << e.values.size() << '\n';
    total += e.values.size();
  }
  log << "entries: " << entries.size() << '\n';
  log << "total parameters: " << total << '\n';
  log << "crc: ok\n";
  return kOk;
}

// Maps library errors onto exit codes with a one-line diagnostic.
template <typename F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const NonFiniteLossError& e) {
    err << "error: " << e.what() << '\n';
    return kNonFinite;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (const char* threads = std::getenv("AGBADA_THREADS")) set_thread_count(std::atoi(threads));

  RunConfig cfg;
  CLI::App app{"Clothing-based gender classification: VGG-style training and evaluation", "agbada"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value configuration file (flags override)");
  app.add_option("--data-dir", cfg.data_dir, "image directory");
  app.add_option("--index-csv", cfg.index_csv, "label index (default <data-dir>/index.csv)");
  app.add_option("--out-dir", cfg.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  app.add_option("--epochs", cfg.epochs, "training epochs")->capture_default_str();
  app.add_option("--batch-size", cfg.batch_size, "mini-batch size")->capture_default_str();
  app.add_option("--lr", cfg.learning_rate, "learning rate")->capture_default_str();
  app.add_option("--unfreeze-k", cfg.unfreeze_k, "number of deepest conv layers left trainable")->capture_default_str();
  app.add_option("--dropout", cfg.dropout_rate, "dropout rate of the head")->capture_default_str();
  app.add_option("--pretrained", cfg.pretrained_weights, "weight file loaded non-strictly before training");
  app.add_option("--input-size", cfg.input_size, "square input side in pixels")->capture_default_str();
  app.add_option("--arch", cfg.arch, "vgg16 or width:convs,... block list")->capture_default_str();
  app.add_option("--flip-prob", cfg.augment.horizontal_flip_prob, "horizontal flip probability")->capture_default_str();
  app.add_option("--rotation", cfg.augment.rotation_deg_max, "max rotation, degrees")->capture_default_str();
  app.add_option("--shift", cfg.augment.shift_frac_max, "max shift, fraction of size")->capture_default_str();
  app.add_option("--zoom", cfg.augment.zoom_frac_max, "max zoom, fraction")->capture_default_str();
  app.add_flag_callback("--no-augment", [&cfg] { cfg.augment.enabled = false; }, "disable augmentation");
  app.add_option("--lr-factor", cfg.reduce_lr.factor, "learning-rate reduction factor")->capture_default_str();
  app.add_option("--lr-patience", cfg.reduce_lr.patience, "epochs without improvement before reducing")->capture_default_str();
  app.add_option("--min-lr", cfg.reduce_lr.min_lr, "learning-rate floor")->capture_default_str();
  app.add_option("--stop-patience", cfg.early_stop.patience, "epochs without improvement before stopping")->capture_default_str();
  app.add_option("--min-delta", cfg.early_stop.min_delta, "smallest val_loss drop counted as improvement")->capture_default_str();

  auto* train = app.add_subcommand("train", "train and write weights, history, split and plots");
  std::string eval_weights;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate weights on the test split");
  evaluate->add_option("--weights,weights", eval_weights, "weight file (default <out-dir>/best.weights)");
  std::string predict_weights, predict_image;
  auto* predict_cmd = app.add_subcommand("predict", "classify one image");
  predict_cmd->add_option("--weights", predict_weights)->required();
  predict_cmd->add_option("--image,image", predict_image)->required();
  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-weights", "list the entries of a weight file");
  inspect->add_option("path", inspect_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  if (*train) return guarded([&] { return cmd_train(cfg, out); }, err);
  if (*evaluate) return guarded([&] { return cmd_evaluate(cfg, eval_weights, out); }, err);
  if (*predict_cmd) return guarded([&] { return cmd_predict(cfg, predict_weights, predict_image, out); }, err);
  if (*inspect) return guarded([&] { return cmd_inspect_weights(inspect_path, out); }, err);
  return kConfigError;
}

}  // namespace agbada::cli
