// lico: build, inspect, convert and run streaming keyword-spotting models.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lico/lico.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Preset {
  std::size_t width, expansion, kernel;  // lico
  std::size_t h1, h2;                    // mlp
};

Preset preset_for(const std::string& name) {
  if (name == "large") return {32, 6, 5, 80, 320};
  return {16, 4, 4, 40, 320};
}

lico::LayerGraph require_graph(const lico::ModelBundle& m, const std::string& what) {
  if (const auto* g = std::get_if<lico::LayerGraph>(&m.net)) return *g;
  lico::fail(lico::ErrorKind::kConfig, what + " needs a float model, got " + std::string(lico::to_string(m.kind())));
}

int cmd_init(const std::string& arch, const std::string& preset, std::size_t stride, std::uint64_t seed,
             const std::string& out) {
  const Preset p = preset_for(preset);
  lico::ModelBundle m;
  m.arch = arch + "-" + preset;
  if (arch == "lico")
    m.net = lico::to_graph(lico::build_lico_net(40, 5, p.width, p.expansion, p.kernel, stride, 11, seed));
  else
    m.net = lico::to_graph(lico::build_mlp(21, 40, p.h1, p.h2, 11, seed, stride));
  m.decoder = lico::default_decoder_config(11, stride);
  lico::save_model(m, out);
  std::cout << "wrote " << out << " (" << m.arch << ", stride " << stride << ")\n";
  return kExitOk;
}

struct LayerRow {
  std::string name;
  std::size_t in, out, kernel, stride;
  lico::Activation act;
  std::string residual;
};

std::vector<LayerRow> layer_rows(const lico::ModelBundle& m) {
  std::vector<LayerRow> rows;
  if (const auto* g = std::get_if<lico::LayerGraph>(&m.net)) {
    for (const auto& st : g->stages)
      rows.push_back({st.name, st.conv.in_channels, st.conv.out_channels, st.conv.kernel, st.conv.stride,
                      st.conv.activation, st.residual_from ? "+in:" + g->stages[*st.residual_from].name : "-"});
  } else if (const auto* l = std::get_if<lico::LinearizedNet>(&m.net)) {
    for (const auto& st : l->stages)
      rows.push_back({st.name, st.in_channels, st.linear.out_dim, st.kernel, st.stride, st.linear.activation,
                      st.residual_from ? "+in:" + l->stages[*st.residual_from].name : "-"});
  } else {
    const auto& q = std::get<lico::QuantizedNet>(m.net);
    for (const auto& st : q.stages)
      rows.push_back({st.name, st.in_channels, st.layer.out_dim, st.kernel, st.stride, st.layer.activation,
                      st.residual_from ? "+in:" + q.stages[*st.residual_from].name : "-"});
  }
  return rows;
}

int cmd_info(const std::string& path) {
  const lico::ModelBundle m = lico::load_model(path);
  const auto params = std::visit([](const auto& n) { return lico::count_params(n); }, m.net);
  const auto macs = std::visit([](const auto& n) { return lico::count_macs_per_step(n); }, m.net);
  std::printf("model %s (%s)\n", m.arch.c_str(), std::string(lico::to_string(m.kind())).c_str());
  std::printf("%-16s %6s %6s %6s %6s %-5s %s\n", "layer", "in", "out", "kernel", "stride", "act", "residual");
  for (const auto& r : layer_rows(m))
    std::printf("%-16s %6zu %6zu %6zu %6zu %-5s %s\n", r.name.c_str(), r.in, r.out, r.kernel, r.stride,
                std::string(lico::to_string(r.act)).c_str(), r.residual.c_str());
  std::printf("receptive field %zu frames, stride %zu\n", lico::model_receptive_field(m), lico::model_first_stride(m));
  std::printf("params %llu, macs %llu\n", static_cast<unsigned long long>(params),
              static_cast<unsigned long long>(macs));
  return kExitOk;
}

int cmd_check(const std::string& path, std::size_t chunk) {
  const lico::ModelBundle m = lico::load_model(path);
  const auto report = lico::check_linearizable(require_graph(m, "check"), chunk);
  std::cout << report.to_string() << "\n";
  return report.compliant ? kExitOk : kExitFailure;
}

int cmd_linearize(const std::string& path, const std::string& out) {
  lico::ModelBundle m = lico::load_model(path);
  const auto g = require_graph(m, "linearize");
  m.net = lico::linearize_network(g, g.stages.front().conv.stride);
  lico::save_model(m, out);
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

lico::LinearizedNet as_linear(const lico::ModelBundle& m) {
  if (const auto* g = std::get_if<lico::LayerGraph>(&m.net))
    return lico::linearize_network(*g, g->stages.front().conv.stride);
  if (const auto* l = std::get_if<lico::LinearizedNet>(&m.net)) return *l;
  lico::fail(lico::ErrorKind::kConfig, "model is already quantized");
}

int cmd_quantize(const std::string& path, const std::string& calib, const std::string& out) {
  lico::ModelBundle m = lico::load_model(path);
  const lico::LinearizedNet lnet = as_linear(m);
  const auto wav = lico::read_wav(calib, m.frontend.sample_rate);
  std::vector<float> samples(wav.samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = lico::pcm16_to_float(wav.samples[i]);
  const lico::Tensor2D feats = lico::stream_features(samples, m.frontend);
  m.net = lico::quantize_network(lnet, lico::calibrate_activations(lnet, feats));
  lico::save_model(m, out);
  std::cout << "wrote " << out << " (calibrated on " << feats.frames() << " frames)\n";
  return kExitOk;
}

int cmd_run(const std::string& path, const std::string& wav_path, const std::string& engine,
            std::optional<double> threshold, const std::string& posteriors) {
  const lico::ModelBundle m = lico::load_model(path);
  const auto wav = lico::read_wav(wav_path, m.frontend.sample_rate);
  const auto outputs = lico::run_stream(m, wav.samples, lico::parse_engine(engine), threshold);
  std::ofstream post;
  if (!posteriors.empty()) {
    post.open(posteriors);
    lico::require(post.good(), lico::ErrorKind::kIo, "cannot write '" + posteriors + "'");
  }
  for (const auto& o : outputs) {
    if (post.is_open()) {
      post << o.posterior.timestamp;
      for (double p : o.posterior.probs) post << ' ' << p;
      post << '\n';
    }
    if (o.event) std::printf("t=%.2f score=%.4f\n", o.end_time_sec, o.event->score);
  }
  return kExitOk;
}

int cmd_verify(const std::string& path, std::size_t steps, std::uint64_t seed) {
  const lico::ModelBundle m = lico::load_model(path);
  const auto rep = lico::verify_equivalence(require_graph(m, "verify"), steps, seed);
  std::printf("steps %zu\n", rep.steps);
  std::printf("streaming vs batch   max |diff| %.3g\n", rep.streaming_vs_batch);
  std::printf("linear vs streaming  max |diff| %.3g\n", rep.linear_vs_streaming);
  std::printf("macs/step            expected %llu executed %llu\n",
              static_cast<unsigned long long>(rep.macs_expected),
              static_cast<unsigned long long>(rep.macs_executed_per_step));
  std::printf("int8 posterior drift %.4f (deterministic: %s)\n", rep.int8_posterior_drift,
              rep.int8_deterministic ? "yes" : "no");
  const bool ok = rep.passed();
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming keyword spotting with linearized convolutions"};
  app.require_subcommand(1);

  std::string arch = "lico", preset = "large", out, model, wav, engine = "linear", calib, posteriors;
  std::size_t stride = 1, chunk = 1, steps = 200;
  std::uint64_t seed = 1;
  double threshold = 0.0;

  auto* init = app.add_subcommand("init", "build a seeded random model");
  init->add_option("--arch", arch)->check(CLI::IsMember({"lico", "mlp"}));
  init->add_option("--preset", preset)->check(CLI::IsMember({"large", "small"}));
  init->add_option("--stride", stride)->check(CLI::PositiveNumber);
  init->add_option("--seed", seed);
  init->add_option("--out", out)->required();

  auto* info = app.add_subcommand("info", "params, MACs per step, receptive field, layers");
  info->add_option("model", model)->required();

  auto* check = app.add_subcommand("check", "report whether the model linearizes at a chunk size");
  check->add_option("model", model)->required();
  check->add_option("--chunk", chunk)->required()->check(CLI::PositiveNumber);

  auto* linearize = app.add_subcommand("linearize", "convert to linear stages");
  linearize->add_option("model", model)->required();
  linearize->add_option("--out", out)->required();

  auto* quantize = app.add_subcommand("quantize", "int8 post-training quantization");
  quantize->add_option("model", model)->required();
  quantize->add_option("--calib", calib, "calibration WAV")->required();
  quantize->add_option("--out", out)->required();

  auto* run = app.add_subcommand("run", "stream a WAV file and print detections");
  run->add_option("model", model)->required();
  run->add_option("--wav", wav)->required();
  run->add_option("--engine", engine)->check(CLI::IsMember({"conv", "linear", "int8"}));
  auto* thr = run->add_option("--threshold", threshold);
  run->add_option("--posteriors", posteriors, "write per-step posteriors here");

  auto* verify = app.add_subcommand("verify", "run the equivalence checks on random input");
  verify->add_option("model", model)->required();
  verify->add_option("--steps", steps)->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*init) return cmd_init(arch, preset, stride, seed, out);
    if (*info) return cmd_info(model);
    if (*check) return cmd_check(model, chunk);
    if (*linearize) return cmd_linearize(model, out);
    if (*quantize) return cmd_quantize(model, calib, out);
    if (*run)
      return cmd_run(model, wav, engine, thr->count() ? std::optional<double>(threshold) : std::nullopt, posteriors);
    if (*verify) return cmd_verify(model, steps, seed);
  } catch (const lico::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
