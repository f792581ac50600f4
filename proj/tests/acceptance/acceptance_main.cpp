// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: acceptance [criterion numbers...]

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "agbada/cli.hpp"
#include "agbada/data/synthetic.hpp"
#include "oracles.hpp"

using namespace agbada;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

class Timer {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

void require(Verdict& v, bool ok, const std::string& what) {
  if (!ok) {
    v.pass = false;
    v.detail += (v.detail.empty() ? "" : "; ") + what;
  }
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---------------------------------------------------------------------------

Verdict gradient_suite() {
  Verdict v;
  Timer t;
  double worst_layer = 0.0, worst_model = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto note = [&](const oracle::GradientErrors& e) { worst_layer = std::max({worst_layer, e.dx, e.dW, e.db}); };

    auto conv = make_conv2d<double>("conv", 2, 3, 3, false);
    conv.params["W"] = oracle::random_tensor<double>({3, 2, 3, 3}, seed + 100);
    conv.params["b"] = oracle::random_tensor<double>({3}, seed + 200);
    note(oracle::check_layer_gradients(conv, oracle::random_tensor<double>({2, 2, 5, 5}, seed), seed));

    auto pool = make_maxpool<double>("pool");
    note(oracle::check_layer_gradients(pool, oracle::random_tensor<double>({2, 2, 6, 5}, seed), seed));

    auto dense = make_dense<double>("dense", 7, 3);
    dense.params["W"] = oracle::random_tensor<double>({3, 7}, seed + 300);
    dense.params["b"] = oracle::random_tensor<double>({3}, seed + 400);
    note(oracle::check_layer_gradients(dense, oracle::random_tensor<double>({4, 7}, seed), seed));

    auto flat = make_flatten<double>("flatten");
    note(oracle::check_layer_gradients(flat, oracle::random_tensor<double>({2, 3, 2, 2}, seed), seed));

    auto drop = make_dropout<double>("dropout", 0.5);
    note(oracle::check_layer_gradients(drop, oracle::random_tensor<double>({4, 6}, seed), seed));

    for (auto kind : {LayerKind::Sigmoid, LayerKind::Softmax}) {
      auto act = make_activation<double>("act", kind);
      note(oracle::check_layer_gradients(act, oracle::random_tensor<double>({3, 5}, seed, -3, 3), seed));
    }
    auto x = oracle::random_tensor<double>({3, 6}, seed, 0.1, 1.0);
    for (std::size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
    auto relu = make_activation<double>("relu", LayerKind::ReLU);
    note(oracle::check_layer_gradients(relu, x, seed));

    // conv(relu) -> pool -> flatten -> dense
    SequentialModel<double> m;
    m.input_shape = {2, 6, 6};
    m.layers.push_back(make_conv2d<double>("conv", 2, 3, 3, true));
    m.layers.push_back(make_maxpool<double>("pool"));
    m.layers.push_back(make_flatten<double>("flatten"));
    m.layers.push_back(make_dense<double>("dense", 27, 2));
    for (auto& l : m.layers)
      for (auto& [name, p] : l.params) p = oracle::random_tensor<double>(p.shape(), seed * 1000 + p.size(), -0.5, 0.5);
    infer_shapes(m);
    worst_model = std::max(worst_model, oracle::check_model_gradients(m, oracle::random_tensor<double>({2, 2, 6, 6}, seed), seed));
  }
  const double secs = t.seconds();
  require(v, worst_layer <= 1e-6, "layer error " + fmt("%.3g", worst_layer));
  require(v, worst_model <= 1e-5, "model error " + fmt("%.3g", worst_model));
  require(v, secs < 60.0, "took " + fmt("%.1f", secs) + " s");
  if (v.pass)
    v.detail = "20 seeds, worst layer " + fmt("%.2g", worst_layer) + ", model " + fmt("%.2g", worst_model) + ", " +
               fmt("%.1f", secs) + " s";
  return v;
}

Verdict kernel_equivalence() {
  Verdict v;
  Rng rng(2718, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 1 + 2 * rng.below(3);
    const std::size_t stride = 1 + rng.below(2);
    const std::size_t pad = rng.below(static_cast<std::uint32_t>(k / 2 + 1));
    const std::size_t cin = 1 + rng.below(6), cout = 1 + rng.below(8);
    const std::size_t h = k + rng.below(12), w = k + rng.below(12);
    const std::size_t n = 1 + rng.below(3);
    const bool relu = rng.below(2) == 1;
    const Window win{k, k, stride, stride, pad, pad};
    auto layer = make_conv2d<float>("c", ConvConfig{cin, cout, win, relu});
    layer.params["W"] = oracle::random_tensor<float>(layer.params["W"].shape(), 10 + trial);
    layer.params["b"] = oracle::random_tensor<float>({cout}, 20 + trial);
    const auto x = oracle::random_tensor<float>({n, cin, h, w}, 30 + trial);
    const auto y = layer_forward(layer, x, Mode::Infer, nullptr, false);
    const auto ref = oracle::direct_conv(x, layer.params["W"], layer.params["b"], win, relu);
    if (y.shape() != ref.shape()) {
      require(v, false, "shape " + shape_string(y.shape()) + " vs " + shape_string(ref.shape()));
      continue;
    }
    worst = std::max(worst, oracle::relative_error(oracle::as_vector(y), oracle::as_vector(ref)));
  }
  require(v, worst <= 1e-5, "conv error " + fmt("%.3g", worst));

  std::size_t mismatched = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + rng.below(70), k = 1 + rng.below(300), n = 1 + rng.below(700);
    const auto a = oracle::random_tensor<float>({m, k}, 40 + trial);
    const auto b = oracle::random_tensor<float>({k, n}, 50 + trial);
    const auto c = matmul(a, b);
    const auto ref = oracle::naive_matmul(a, b);
    if (std::memcmp(c.data().data(), ref.data().data(), c.size() * sizeof(float)) != 0) ++mismatched;
  }
  require(v, mismatched == 0, std::to_string(mismatched) + " matmul shapes not bitwise equal");
  if (v.pass) v.detail = "60 conv shapes, worst " + fmt("%.2g", worst) + "; 60 matmul shapes bitwise equal";
  return v;
}

Verdict metric_oracle() {
  Verdict v;
  ConfusionMatrix cm;
  cm.counts = {{{93, 7}, {13, 47}}};
  const auto text = render_report(metrics(cm));
  std::istringstream in(text);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::istringstream ls(line);
    std::vector<std::string> cells;
    for (std::string c; ls >> c;) cells.push_back(c);
    if (!cells.empty()) rows.push_back(cells);
  }
  const std::vector<std::vector<std::string>> expected{
      {"precision", "recall", "f1-score", "support"},
      {"0", "0.88", "0.93", "0.90", "100"},
      {"1", "0.87", "0.78", "0.82", "60"},
      {"accuracy", "0.88", "160"},
      {"macro", "avg", "0.87", "0.86", "0.86", "160"},
      {"weighted", "avg", "0.87", "0.88", "0.87", "160"}};
  require(v, rows == expected, "rendered report differs:\n" + text);
  if (v.pass) v.detail = "all report cells match";
  return v;
}

Verdict split_oracle() {
  Verdict v;
  std::vector<data::IndexRow> rows;
  for (std::size_t i = 0; i < 1600; ++i) {
    const bool male = i % 8 >= 5;  // 1000 female, 600 male
    rows.push_back({"img_" + std::to_string(i) + ".png", male ? "Agbada" : "Iro and Buba", male ? "Male" : "Female"});
  }
  const auto first = data::stratified_split(rows, 42);
  auto count_male = [&](const std::vector<std::size_t>& ids) {
    std::size_t m = 0;
    for (auto id : ids) m += rows[id].gender == "Male";
    return m;
  };
  require(v, first.train.size() == 1280 && first.val.size() == 160 && first.test.size() == 160,
          "sizes " + std::to_string(first.train.size()) + "/" + std::to_string(first.val.size()) + "/" +
              std::to_string(first.test.size()));
  const auto test_male = count_male(first.test);
  require(v, first.test.size() - test_male == 100 && test_male == 60,
          "test classes " + std::to_string(first.test.size() - test_male) + "/" + std::to_string(test_male));
  for (int rerun = 0; rerun < 3; ++rerun) {
    const auto again = data::stratified_split(rows, 42);
    require(v, again.train == first.train && again.val == first.val && again.test == first.test,
            "rerun " + std::to_string(rerun + 1) + " differs");
  }
  if (v.pass) v.detail = "1280/160/160, test 100 female / 60 male, 3 identical reruns";
  return v;
}

Verdict synthetic_end_to_end() {
  Verdict v;
  Timer t;
  const auto dir = oracle::temp_dir("acceptance_e2e");
  const auto rows = data::write_synthetic_corpus(dir, {400, 0.625, 180, 7});
  const auto split = data::stratified_split(rows, 7);

  auto model = build_gender_classifier(build_vgg_base<float>({3, 180, 180}, {{1, 4}, {1, 8}}), 0.5);
  initialize_he(model, 7);

  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  cfg.early_stop.patience = 3;
  cfg.early_stop.min_delta = 1e-3;
  cfg.seed = 7;
  cfg.checkpoint_path = (dir / "best.weights").string();

  data::ImageCache images(dir, rows, 180, 180);
  data::BatchStream train(rows, split.train, images.loader(), {cfg.batch_size, true, cfg.seed, data::AugmentConfig{}});
  data::BatchStream val(rows, split.val, images.loader(), {cfg.batch_size, false, cfg.seed, std::nullopt});
  int checkpoints = 0;
  const auto result = run_training(model, train, val, cfg, [&](const EpochRecord& r, const CallbackDecision& d) {
    checkpoints += d.save_checkpoint;
    std::fprintf(stderr, "  e2e epoch %2d  loss %.4f  acc %.3f  val_loss %.4f  val_acc %.3f  %.1f s%s%s\n", r.epoch,
                 r.train_loss, r.train_acc, r.val_loss, r.val_acc, t.seconds(), d.save_checkpoint ? "  [checkpoint]" : "",
                 d.stop ? "  [stop]" : "");
  });

  // the returned weights must be the checkpointed ones
  data::BatchStream val_again(rows, split.val, images.loader(), {cfg.batch_size, false, cfg.seed, std::nullopt});
  const double restored_loss = evaluate_stream(model, val_again).loss;
  auto from_disk = model;
  load_weights(from_disk, cfg.checkpoint_path);

  const auto eval = evaluate_model(model, rows, split.test, images.loader(), 32);
  const double secs = t.seconds();
  std::filesystem::remove_all(dir);

  require(v, eval.report.accuracy >= 0.95, "test accuracy " + fmt("%.4f", eval.report.accuracy));
  require(v, secs < 300.0, "took " + fmt("%.1f", secs) + " s");
  require(v, result.history.size() <= 30, "ran " + std::to_string(result.history.size()) + " epochs");
  require(v, result.stopped_early, "early stopping never triggered");
  require(v, result.best_epoch < static_cast<int>(result.history.size()), "best epoch was the last epoch");
  require(v, restored_loss == result.best_val_loss, "restored val_loss " + fmt("%.17g", restored_loss) +
                                                        " != best " + fmt("%.17g", result.best_val_loss));
  require(v, snapshot(from_disk) == snapshot(model), "checkpoint file differs from restored model");
  if (v.pass)
    v.detail = "test accuracy " + fmt("%.4f", eval.report.accuracy) + ", stopped after epoch " +
               std::to_string(result.history.size()) + ", restored epoch " + std::to_string(result.best_epoch) + " (" +
               std::to_string(checkpoints) + " checkpoints), " + fmt("%.1f", secs) + " s";
  return v;
}

Verdict overfit_one_batch() {
  Verdict v;
  auto model = build_gender_classifier(build_vgg_base<float>({3, 32, 32}, {{1, 8}, {1, 16}}), 0.5);
  initialize_he(model, 5);
  const auto x = oracle::random_tensor<float>({8, 3, 32, 32}, 77, 0.0, 1.0);
  const Tensor<float> y({8, 1}, {0, 1, 1, 0, 1, 0, 0, 1});
  double loss = 1.0;
  int steps = 0;
  Rng rng(5, Stream::Dropout);
  while (steps < 300 && loss >= 0.05) {
    const auto p = forward(model, x, Mode::Train, &rng);
    const auto r = bce_loss(p, y);
    loss = r.loss;
    if (loss < 0.05) break;
    backward_from_logits(model, r.dlogits);
    sgd_step(model, 0.05);
    ++steps;
  }
  require(v, loss < 0.05, "loss " + fmt("%.4f", loss) + " after 300 steps");
  if (v.pass) v.detail = "loss " + fmt("%.4f", loss) + " after " + std::to_string(steps) + " steps";
  return v;
}

Verdict weight_format() {
  Verdict v;
  const auto dir = oracle::temp_dir("acceptance_weights");
  auto base = build_vgg16_base<float>({3, 180, 180});
  initialize_he(base, 3);
  for (auto& l : base.layers)
    if (l.has_params()) l.params.at("b") = oracle::random_tensor<float>(l.params.at("b").shape(), 3);
  const auto path = (dir / "base.weights").string();
  save_weights(base, path);

  auto back = build_vgg16_base<float>({3, 180, 180});
  load_weights(back, path);
  require(v, snapshot(back) == snapshot(base), "round trip changed values");
  save_weights(back, (dir / "again.weights").string());
  const auto bytes_a = slurp(path);
  require(v, bytes_a == slurp(dir / "again.weights"), "re-saved file differs");

  // corruptions on a smaller file keep the loop fast; the format is the same
  auto small = build_vgg_base<float>({3, 16, 16}, {{1, 4}, {1, 8}});
  initialize_he(small, 4);
  const auto clean = encode_weights(weight_entries(small));
  Rng rng(99, 0);
  int undetected = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto bytes = clean;
    bytes[rng.below(static_cast<std::uint32_t>(bytes.size()))] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    try {
      decode_weights(bytes);
      ++undetected;
    } catch (const WeightFileError&) {
    }
  }
  require(v, undetected == 0, std::to_string(undetected) + " corruptions undetected");

  const std::string arg0 = "agbada", arg1 = "inspect-weights";
  const char* argv[] = {arg0.c_str(), arg1.c_str(), path.c_str()};
  std::ostringstream out, err;
  const int code = cli::run(3, argv, out, err);
  require(v, code == 0 && out.str().find("total parameters: 14714688\n") != std::string::npos,
          "inspect-weights output: " + out.str() + err.str());
  std::filesystem::remove_all(dir);
  if (v.pass) v.detail = "bit-exact round trip, 100/100 corruptions detected, inspect-weights 14714688";
  return v;
}

Verdict determinism() {
  Verdict v;
  const auto dir = oracle::temp_dir("acceptance_determinism");
  data::write_synthetic_corpus(dir / "data", {48, 0.625, 24, 11});
  auto train_into = [&](const std::string& name) {
    const std::vector<std::string> args{"agbada",     "train",       "--data-dir", (dir / "data").string(),
                                        "--out-dir",  (dir / name).string(), "--input-size", "24",
                                        "--arch",     "4:1,8:1",     "--unfreeze-k", "2",
                                        "--epochs",   "4",           "--batch-size", "8",
                                        "--lr",       "0.01",        "--seed",       "5"};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    require(v, code == 0, name + " exited " + std::to_string(code) + ": " + err.str());
  };
  train_into("run1");
  train_into("run2");
  for (const char* file : {"history.csv", "best.weights"}) {
    const auto a = slurp(dir / "run1" / file), b = slurp(dir / "run2" / file);
    require(v, !a.empty() && a == b, std::string(file) + " differs");
  }
  std::filesystem::remove_all(dir);
  if (v.pass) v.detail = "history.csv and best.weights byte-identical";
  return v;
}

Verdict callback_traces() {
  Verdict v;
  {
    TrainConfig cfg;
    cfg.early_stop.patience = 2;
    CallbackState state;
    const std::vector<double> losses{0.5, 0.4, 0.41, 0.42, 0.43};
    std::vector<int> saved;
    int stop = 0;
    for (int e = 1; e <= 5 && !stop; ++e) {
      const auto d = apply_callbacks(state, e, losses[e - 1], 1e-3, cfg);
      if (d.save_checkpoint) saved.push_back(e);
      if (d.stop) stop = e;
    }
    require(v, saved == std::vector<int>{1, 2}, "trace 1 checkpoints");
    require(v, stop == 4, "trace 1 stopped at " + std::to_string(stop));
    require(v, state.best_epoch == 2, "trace 1 restores epoch " + std::to_string(state.best_epoch));
  }
  {
    TrainConfig cfg;
    CallbackState state;
    double lr = 1e-3;
    int reduced_at = 0;
    for (int e = 1; e <= 4; ++e) {
      const auto d = apply_callbacks(state, e, 0.6931, lr, cfg);
      if (d.new_lr && !reduced_at) {
        reduced_at = e;
        lr = *d.new_lr;
      }
    }
    require(v, reduced_at == 4 && lr == 5e-4, "trace 2 reduced at epoch " + std::to_string(reduced_at));
  }
  {
    TrainConfig cfg;
    CallbackState state;
    bool ok = true;
    for (int e = 1; e <= 50; ++e) {
      const auto d = apply_callbacks(state, e, 1.0 - 0.01 * e, 1e-3, cfg);
      ok = ok && d.save_checkpoint && !d.new_lr && !d.stop;
    }
    require(v, ok, "trace 3");
  }
  if (v.pass) v.detail = "3 traces reproduced";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient suite", gradient_suite},
      {"kernel equivalence", kernel_equivalence},
      {"metric oracle", metric_oracle},
      {"split oracle", split_oracle},
      {"synthetic end-to-end", synthetic_end_to_end},
      {"overfit one batch", overfit_one_batch},
      {"weight format", weight_format},
      {"determinism", determinism},
      {"callback traces", callback_traces}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
