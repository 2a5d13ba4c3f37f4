#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "balsparse/bench.hpp"
#include "balsparse/commands.hpp"
#include "balsparse/error.hpp"
#include "balsparse/format.hpp"
#include "balsparse/random.hpp"
#include "balsparse/trainer.hpp"
#include "balsparse/viz.hpp"

namespace bs = balsparse;
namespace tr = balsparse::trainer;

namespace {

constexpr std::uint64_t kDefaultSeed = 1;

const std::map<std::string, bs::ScheduleShape> kSchedules = {{"cubic", bs::ScheduleShape::kCubic},
                                                              {"linear", bs::ScheduleShape::kLinear}};
const std::map<std::string, tr::PatternKind> kPatterns = {{"balanced", tr::PatternKind::kBalanced},
                                                           {"random", tr::PatternKind::kRandom},
                                                           {"block", tr::PatternKind::kBlock},
                                                           {"vector", tr::PatternKind::kVector}};
const std::map<std::string, bs::VectorAxis> kAxes = {{"row", bs::VectorAxis::kRow}, {"col", bs::VectorAxis::kCol}};
const std::map<std::string, bs::TileCriterion> kCriteria = {{"max", bs::TileCriterion::kMax},
                                                             {"mean", bs::TileCriterion::kMean}};
const std::map<std::string, bs::MapFormat> kFormats = {{"text", bs::MapFormat::kText}, {"pgm", bs::MapFormat::kPgm}};

template <typename T>
std::vector<std::string> keys(const std::map<std::string, T>& m) {
  std::vector<std::string> out;
  for (const auto& [k, v] : m) out.push_back(k);
  return out;
}

// Writes to --out when given, stdout otherwise.
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw bs::Error(bs::ErrorKind::kIoFailure, "cannot open " + path + " for writing");
  write(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balanced sparsity toolkit: pruning, kernels, theory checks and toy experiments"};
  app.require_subcommand(1);
  int exit_code = 0;

  // gen -------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Write a random Gaussian dense matrix");
  std::size_t gen_rows = 64, gen_cols = 64;
  std::uint64_t gen_seed = kDefaultSeed;
  std::string gen_out;
  gen->add_option("--rows", gen_rows, "Row count")->capture_default_str();
  gen->add_option("--cols", gen_cols, "Column count")->capture_default_str();
  gen->add_option("--seed", gen_seed, "RNG seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output .bsm path")->required();
  gen->callback([&] {
    bs::DenseMatrix m(gen_rows, gen_cols);
    bs::CounterRng rng(gen_seed, 0);
    for (auto& v : m.values()) v = static_cast<float>(rng.normal());
    bs::save(m, gen_out);
  });

  // prune -----------------------------------------------------------------
  auto* prune = app.add_subcommand("prune", "Prune a matrix file");
  bs::PruneFileOptions popt;
  std::string prune_in, prune_out;
  std::uint64_t prune_seed = kDefaultSeed;
  std::vector<std::size_t> tile;
  prune->add_option("--in", prune_in, "Input .bsm (dense or balanced)")->required()->check(CLI::ExistingFile);
  prune->add_option("--out", prune_out, "Output .bsm")->required();
  std::string prune_pattern = "balanced", prune_criterion = "max", prune_axis = "row", prune_schedule = "cubic";
  prune->add_option("--pattern", prune_pattern, "Sparsity pattern")
      ->check(CLI::IsMember(keys(kPatterns)))
      ->capture_default_str();
  prune->add_option("--sparsity", popt.sparsity, "Target sparsity in [0, 1)")->capture_default_str();
  prune->add_option("--block-num", popt.block_num, "Blocks per row (balanced)")->capture_default_str();
  prune->add_option("--tile", tile, "Tile height and width (block)")->expected(2);
  prune->add_option("--criterion", prune_criterion, "Tile score (block)")
      ->check(CLI::IsMember(keys(kCriteria)))
      ->capture_default_str();
  prune->add_option("--axis", prune_axis, "Pruned vectors (vector)")->check(CLI::IsMember(keys(kAxes)))->capture_default_str();
  prune->add_option("--schedule", prune_schedule, "Sparsity trajectory (balanced)")
      ->check(CLI::IsMember(keys(kSchedules)))
      ->capture_default_str();
  prune->add_option("--iterations", popt.iterations, "Schedule iterations (balanced)")->capture_default_str();
  prune->add_flag("--pad", popt.pad, "Zero-pad columns to a multiple of --block-num");
  prune->add_option("--seed", prune_seed, "Accepted for uniformity; pruning is deterministic");
  prune->callback([&] {
    popt.pattern = kPatterns.at(prune_pattern);
    popt.tile_criterion = kCriteria.at(prune_criterion);
    popt.vector_axis = kAxes.at(prune_axis);
    popt.schedule = kSchedules.at(prune_schedule);
    if (tile.size() == 2) {
      popt.tile_rows = tile[0];
      popt.tile_cols = tile[1];
    }
    bs::print(std::cout, bs::prune_file(prune_in, prune_out, popt));
  });

  // bench -----------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "Time dense, CSR and balanced products");
  bs::BenchOptions bopt;
  std::string bench_out;
  bench->add_option("--sizes", bopt.sizes, "Square matrix sizes")->capture_default_str();
  bench->add_option("--sparsities", bopt.sparsities, "Sparsities")->capture_default_str();
  bench->add_option("--batch", bopt.batch, "Right-hand-side columns")->capture_default_str();
  bench->add_option("--repeats", bopt.repeats, "Timed repeats (>= 3)")->capture_default_str();
  bench->add_option("--warmup", bopt.warmup, "Untimed warmup runs")->capture_default_str();
  bench->add_option("--block-num", bopt.block_num, "Blocks per row")->capture_default_str();
  bench->add_option("--workers", bopt.workers, "Worker threads")->capture_default_str();
  bench->add_option("--otime-us", bopt.o_time_us, "Overhead time for the ideal model")->capture_default_str();
  bench->add_option("--seed", bopt.seed, "RNG seed")->capture_default_str();
  bench->add_option("--out", bench_out, "CSV path (stdout when omitted)");
  bench->callback([&] {
    const auto records = bs::bench(bopt);
    emit(bench_out, [&](std::ostream& out) { bs::write_bench_csv(out, records); });
  });

  // theory ----------------------------------------------------------------
  auto* theory = app.add_subcommand("theory", "Check the distortion closed forms against Monte Carlo");
  bs::theory::TheoryConfig tcfg;
  std::size_t trials = 2000, theory_workers = 1;
  std::uint64_t theory_seed = 7;
  theory->add_option("--M", tcfg.M, "Output dimension")->capture_default_str();
  theory->add_option("--N", tcfg.N, "Input dimension")->capture_default_str();
  theory->add_option("--K", tcfg.K, "Blocks per row")->capture_default_str();
  theory->add_option("--sigma-w", tcfg.sigma_w, "Weight standard deviation")->capture_default_str();
  theory->add_option("--sigma-x", tcfg.sigma_x, "Input standard deviation")->capture_default_str();
  theory->add_option("--sparsity", tcfg.sparsity, "Sparsity")->capture_default_str();
  theory->add_option("--trials", trials, "Monte Carlo trials")->capture_default_str();
  theory->add_option("--seed", theory_seed, "RNG seed")->capture_default_str();
  theory->add_option("--workers", theory_workers, "Worker threads")->capture_default_str();
  theory->callback([&] {
    const auto report = bs::theory_check(tcfg, trials, theory_seed, theory_workers);
    bs::print(std::cout, report);
    exit_code = report.passed() ? 0 : 1;
  });

  // demo ------------------------------------------------------------------
  auto* demo = app.add_subcommand("demo", "Prune-retrain experiments on the spiral task");
  std::vector<std::string> demo_patterns = {"balanced", "random", "block", "vector"};
  std::vector<std::size_t> knobs = {16};
  tr::ExperimentConfig ecfg;
  std::uint64_t demo_seed = kDefaultSeed;
  std::string demo_out;
  bool no_withdraw = false;
  demo->add_option("--pattern", demo_patterns, "Patterns to run")
      ->check(CLI::IsMember(keys(kPatterns)))
      ->capture_default_str();
  demo->add_option("--sparsity", ecfg.target_sparsity, "Target sparsity")->capture_default_str();
  demo->add_option("--knob", knobs, "Balance ranges (balanced) or tile edges (block)")->capture_default_str();
  demo->add_option("--iterations", ecfg.schedule.num_iterations, "Iterations per layer")->capture_default_str();
  std::string demo_schedule = "cubic", demo_axis = "col";
  demo->add_option("--schedule", demo_schedule, "Sparsity trajectory")
      ->check(CLI::IsMember(keys(kSchedules)))
      ->capture_default_str();
  demo->add_option("--epochs", ecfg.retraining.epochs, "Retraining epochs per iteration")->capture_default_str();
  demo->add_option("--axis", demo_axis, "Pruned vectors (vector)")->check(CLI::IsMember(keys(kAxes)))->capture_default_str();
  demo->add_flag("--no-withdraw", no_withdraw, "Run to the target even when accuracy drops");
  demo->add_option("--seed", demo_seed, "Seed for data, initialization and retraining")->capture_default_str();
  demo->add_option("--out", demo_out, "CSV path (stdout when omitted)");
  demo->callback([&] {
    ecfg.schedule.shape = kSchedules.at(demo_schedule);
    ecfg.vector_axis = kAxes.at(demo_axis);
    const auto data = tr::make_dataset(demo_seed);
    tr::ReferenceOptions ropt;
    ropt.init_seed = demo_seed + 1;
    ropt.training.seed = demo_seed + 2;
    const auto reference = tr::train_reference(data, ropt);
    std::cerr << "reference accuracy " << reference.test_accuracy << '\n';
    if (no_withdraw) ecfg.withdraw_threshold.reset();
    ecfg.retraining.seed = demo_seed + 3;
    std::vector<tr::ExperimentResult> results;
    for (const auto& name : demo_patterns) {
      ecfg.pattern = kPatterns.at(name);
      const bool uses_knob = ecfg.pattern == tr::PatternKind::kBalanced || ecfg.pattern == tr::PatternKind::kBlock;
      for (const auto knob : uses_knob ? knobs : std::vector<std::size_t>{0}) {
        ecfg.knob = knob;
        results.push_back(tr::prune_retrain_experiment(reference, data, ecfg));
        std::cerr << name << " knob " << knob << ": accuracy " << results.back().final_accuracy() << " at sparsity "
                  << results.back().final_sparsity() << (results.back().withdrawn ? " (withdrawn)" : "") << '\n';
      }
    }
    emit(demo_out, [&](std::ostream& out) { tr::write_csv(out, results); });
  });

  // viz -------------------------------------------------------------------
  auto* viz = app.add_subcommand("viz", "Render a weight map");
  std::string viz_in, viz_out;
  std::string format = "text";
  std::size_t viz_block = 0;
  std::uint64_t viz_seed = kDefaultSeed;
  viz->add_option("--in", viz_in, "Input .bsm")->required();
  viz->add_option("--out", viz_out, "Output image path")->required();
  viz->add_option("--format", format, "Image format")->check(CLI::IsMember(keys(kFormats)))->capture_default_str();
  viz->add_option("--block-size", viz_block, "Block boundary width for dense inputs (text)");
  viz->add_option("--seed", viz_seed, "Accepted for uniformity; rendering is deterministic");
  viz->callback([&] { bs::render_weight_map(viz_in, viz_out, kFormats.at(format), viz_block); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const bs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return exit_code;
}
