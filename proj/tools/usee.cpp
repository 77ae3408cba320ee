// usee: conditional diffusion speech enhancement / editing toolkit
//
// Subcommands: simulate, train, enhance, edit, eval, kernel-check.
// Exit codes: 0 success, 1 usage/parse, 2 numeric-check failure, 3 I/O.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "usee/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;

  usee::RunConfig load() const {
    usee::RunConfig cfg;
    if (!config_path.empty()) cfg = usee::load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.seed_set = true;
    }
    if (!cfg.seed_set) throw CLI::ValidationError("a seed is required (--seed or run.seed)");
    cfg.sched.validate();
    cfg.solver.validate();
    return cfg;
  }
};

void add_common(CLI::App* sub, CommonArgs& a) {
  sub->add_option("--config", a.config_path, "run config file (key = value with [sections])");
  sub->add_option("--seed", a.seed, "master seed (overrides run.seed)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unified diffusion-based speech enhancement and editing"};
  app.require_subcommand(1);

  CommonArgs common;

  auto* sim = app.add_subcommand("simulate", "build a paired source/target dataset");
  std::size_t n_pairs = 10;
  std::string out_dir;
  add_common(sim, common);
  sim->add_option("--n-pairs", n_pairs, "number of pairs to simulate");
  sim->add_option("--out", out_dir, "output directory")->required();

  auto* trn = app.add_subcommand("train", "train the score network on a manifest");
  std::string manifest, checkpoint, resume;
  std::optional<std::size_t> steps;
  add_common(trn, common);
  trn->add_option("--manifest", manifest, "dataset manifest")->required();
  trn->add_option("--checkpoint", checkpoint, "output checkpoint path")->required();
  trn->add_option("--resume", resume, "resume from an existing checkpoint");
  trn->add_option("--steps", steps, "optimizer steps (overrides train.steps)");

  auto* enh = app.add_subcommand("enhance", "denoise / dereverberate one file");
  std::string in_wav, out_wav, prompt = "Remove noise";
  add_common(enh, common);
  enh->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  enh->add_option("--in", in_wav, "input wav")->required();
  enh->add_option("--out", out_wav, "output wav")->required();
  enh->add_option("--prompt", prompt, "Remove noise | Remove reverberation");

  auto* edt = app.add_subcommand("edit", "prompt-controlled editing of one file");
  add_common(edt, common);
  edt->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  edt->add_option("--in", in_wav, "input wav")->required();
  edt->add_option("--out", out_wav, "output wav")->required();
  edt->add_option("--prompt", prompt, "Add background ... | Add reverberation ...")->required();

  auto* evl = app.add_subcommand("eval", "evaluate a checkpoint over a manifest");
  add_common(evl, common);
  evl->add_option("--manifest", manifest, "dataset manifest")->required();
  evl->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  evl->add_option("--out", out_wav, "output CSV path")->required();

  auto* chk = app.add_subcommand("kernel-check", "run the numeric oracle checks");
  add_common(chk, common);

  CLI11_PARSE(app, argc, argv);

  try {
    usee::RunConfig cfg = common.load();
    if (*sim) {
      auto mpath = usee::run_simulate(cfg, n_pairs, out_dir);
      auto m = usee::load_manifest(mpath);
      std::cout << "wrote " << mpath.string() << " (" << m.entries.size() << " entries)\n";
    } else if (*trn) {
      if (steps) cfg.train_steps = *steps;
      std::optional<usee::fs::path> resume_from;
      if (!resume.empty()) resume_from = resume;
      auto p = usee::run_train(cfg, manifest, checkpoint, resume_from);
      std::cout << "wrote " << p.string() << "\n";
    } else if (*enh || *edt) {
      auto r = usee::run_generate_file(cfg, checkpoint, in_wav, prompt, out_wav, edt->parsed());
      std::cout << "wrote " << out_wav << " lsd_vs_input=" << r.lsd;
      if (r.rt60_s) std::cout << " rt60_s=" << *r.rt60_s;
      std::cout << "\n";
    } else if (*evl) {
      usee::run_eval(cfg, checkpoint, manifest, out_wav);
      std::cout << "wrote " << out_wav << "\n";
    } else if (*chk) {
      if (!usee::run_kernel_check(cfg)) return 2;
    }
  } catch (const usee::PromptParseError& e) {
    std::cerr << "prompt error at token " << e.token_pos << ": " << e.what() << "\n";
    return 1;
  } catch (const usee::PromptRangeError& e) {
    std::cerr << "prompt error: " << e.what() << "\n";
    return 1;
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const usee::WavError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
