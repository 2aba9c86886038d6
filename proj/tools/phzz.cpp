// Command-line front end: `sample` runs the posterior sampler on a tree +
// trait table, `benchmark` runs the built-in comparison targets, and
// `summarize` post-processes chain CSV files. Errors leave as exit code 1
// (configuration), 2 (data), or 3 (runtime divergence) with a JSON message
// on stderr.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "phzz/benchmark.hpp"
#include "phzz/gibbs.hpp"
#include "phzz/io.hpp"
#include "phzz/lg_joint.hpp"
#include "phzz/summary.hpp"

namespace {

int thread_count() {
  if (const char* env = std::getenv("PHZZ_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Chains abort when more than half of the post-warmup transitions diverge.
void check_divergence_cascade(const phzz::TuningReport& rep) {
  if (rep.iterations > 0 && rep.divergences > rep.iterations / 2)
    throw DivergenceError("divergence cascade: " +
                          std::to_string(rep.divergences) + " of " +
                          std::to_string(rep.iterations) + " transitions");
}

int run_sample(const std::string& tree_path, const std::string& traits_path,
               const std::string& config_path, const std::string& out_dir,
               double highlight) {
  phzz::TraitTyping typing;
  phzz::ModelConfig cfg = phzz::load_config(config_path, &typing);

  std::ifstream tin(tree_path);
  if (!tin) throw phzz::DataError("cannot open tree file: " + tree_path);
  std::string newick((std::istreambuf_iterator<char>(tin)),
                     std::istreambuf_iterator<char>());
  phzz::Phylogeny tree = phzz::parse_newick(newick);
  phzz::TraitTable tab = phzz::read_traits_csv(traits_path, typing);
  std::vector<phzz::TraitRow> rows = phzz::align_to_tree(tab, tree);
  phzz::PosteriorModel model(tab.spec, rows, tree, cfg);

  std::filesystem::create_directories(out_dir);
  std::vector<phzz::TuningReport> reports(cfg.chains);
  std::vector<std::string> chain_paths;
  std::vector<std::exception_ptr> errors(cfg.chains);
  for (int c = 0; c < cfg.chains; ++c)
    chain_paths.push_back(out_dir + "/chain_" + std::to_string(c + 1) +
                          ".csv");

  int workers = std::min(thread_count(), cfg.chains);
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int c = next.fetch_add(1); c < cfg.chains; c = next.fetch_add(1)) {
        try {
          phzz::ChainWriter writer(chain_paths[c], model);
          std::mt19937_64 rng(cfg.seed + std::uint64_t(c));
          reports[c] = phzz::run_chain(
              model, rng,
              [&](const phzz::ChainRecord& rec) { writer.write(rec); });
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& rep : reports) check_divergence_cascade(rep);

  nlohmann::json tuning = nlohmann::json::array();
  for (int c = 0; c < cfg.chains; ++c) {
    tuning.push_back({{"chain", c + 1},
                      {"adapted_eps", reports[c].adapted_eps},
                      {"rs_trajectory", reports[c].rs_trajectory},
                      {"divergences", reports[c].divergences},
                      {"avg_tree_depth", reports[c].avg_tree_depth}});
  }
  phzz::write_json(out_dir + "/tuning.json", tuning);

  std::vector<phzz::ChainFile> chains;
  for (const auto& p : chain_paths) chains.push_back(phzz::read_chain_csv(p));
  phzz::Summary s = phzz::summarize_chains(chains);
  phzz::write_json(out_dir + "/summary.json",
                   phzz::summary_to_json(s, highlight));
  std::cout << "wrote " << cfg.chains << " chain file(s) and summary.json to "
            << out_dir << "\n";
  return 0;
}

phzz::ModelConfig benchmark_config(const std::string& sampler, long iters,
                                   std::uint64_t seed) {
  phzz::ModelConfig cfg;
  cfg.seed = seed;
  cfg.iterations = iters;
  cfg.burnin = iters / 2;
  cfg.chains = 1;
  if (sampler == "lg-nuts") {
    cfg.mode = "joint";
    cfg.joint_kernel = "lg-nuts";
    // the joint trajectory is bounded by the latent block's decorrelation
    // time; deeper trees add cost without mixing
    cfg.max_depth = 6;
  } else if (sampler == "lg-hmc") {
    cfg.mode = "joint";
    cfg.joint_kernel = "lg-hmc";
    cfg.lstep = 8;
  } else if (sampler == "alternate-gibbs" || sampler == "zigzag") {
    cfg.mode = "alternate";
    cfg.latent_sampler = "zigzag";
  } else if (sampler == "bps") {
    cfg.mode = "alternate";
    cfg.latent_sampler = "bps";
  } else {
    throw phzz::ConfigError("sampler not valid for simulated-phylo: " +
                            sampler);
  }
  return cfg;
}

int run_benchmark(const std::string& target, const std::string& sampler,
                  long iters, std::uint64_t seed, double lambda_ref,
                  int n_taxa, const std::string& out_path) {
  std::ofstream out(out_path);
  if (!out) throw phzz::DataError("cannot open output: " + out_path);
  if (target == "orthant256") {
    if (sampler != "zigzag" && sampler != "bps")
      throw phzz::ConfigError("orthant256 supports samplers zigzag and bps");
    phzz::OrthantRun r =
        phzz::run_orthant(256, sampler, iters, lambda_ref, seed, true);
    out << "coordinate,mean,var\n";
    for (Eigen::Index i = 0; i < r.mean.size(); ++i)
      out << (i + 1) << "," << phzz::fmt17(r.mean[i]) << ","
          << phzz::fmt17(r.var[i]) << "\n";
    phzz::JumpDecomposition jd = phzz::jump_decomposition(r.draws);
    std::cout << "target,sampler,iters,seed,mean_avg,var_avg,min_ess,seconds,"
                 "min_ess_per_sec,lag1_logdens,mean_t2\n"
              << target << "," << sampler << "," << iters << "," << seed << ","
              << phzz::fmt17(r.mean.mean()) << "," << phzz::fmt17(r.var.mean())
              << "," << phzz::fmt17(r.min_ess) << "," << phzz::fmt17(r.seconds)
              << "," << phzz::fmt17(r.min_ess / r.seconds) << ","
              << phzz::fmt17(phzz::lag1_autocorrelation(r.logdens)) << ","
              << phzz::fmt17(jd.mean_t2) << "\n";
    return 0;
  }
  if (target != "simulated-phylo")
    throw phzz::ConfigError("unknown benchmark target: " + target);

  phzz::PhyloBenchmark b = phzz::make_phylo_benchmark(n_taxa, seed);
  phzz::ModelConfig cfg = benchmark_config(sampler, iters, seed);
  phzz::PosteriorModel model(b.spec, b.rows, b.tree, cfg);
  std::vector<phzz::ChainRecord> recs;
  std::mt19937_64 rng(seed);
  auto t0 = std::chrono::steady_clock::now();
  phzz::TuningReport rep = phzz::run_chain(
      model, rng, [&](const phzz::ChainRecord& rec) { recs.push_back(rec); });
  double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  check_divergence_cascade(rep);
  phzz::Summary s =
      phzz::summarize_chains({phzz::records_to_chainfile(model, recs)});
  out << "target,sampler,iters,seed,taxa,min_ess_partial,seconds,"
         "min_ess_per_sec,divergences,adapted_eps\n"
      << target << "," << sampler << "," << iters << "," << seed << ","
      << n_taxa << "," << phzz::fmt17(s.min_ess_partial) << ","
      << phzz::fmt17(seconds) << ","
      << phzz::fmt17(s.min_ess_partial / seconds) << "," << rep.divergences
      << "," << phzz::fmt17(rep.adapted_eps) << "\n";
  std::cout << "wrote benchmark table to " << out_path << "\n";
  return 0;
}

int run_summarize(const std::vector<std::string>& chain_paths,
                  const std::string& out_path, double highlight,
                  const std::string& trace_out) {
  std::vector<phzz::ChainFile> chains;
  for (const auto& p : chain_paths) chains.push_back(phzz::read_chain_csv(p));
  phzz::Summary s = phzz::summarize_chains(chains);
  phzz::write_json(out_path, phzz::summary_to_json(s, highlight));
  if (!trace_out.empty()) {
    // plot-ready long format: chain, iteration, parameter, value
    std::ofstream t(trace_out);
    if (!t) throw phzz::DataError("cannot open output: " + trace_out);
    t << "chain,draw,parameter,value\n";
    for (std::size_t c = 0; c < chains.size(); ++c)
      for (std::size_t col = 0; col < chains[c].columns.size(); ++col) {
        const std::string& name = chains[c].columns[col];
        if (name == "iteration" || name == "seconds" || name == "accept")
          continue;
        for (std::size_t i = 0; i < chains[c].data[col].size(); ++i)
          t << (c + 1) << "," << i << "," << name << ","
            << phzz::fmt17(chains[c].data[col][i]) << "\n";
      }
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phylogenetic probit sampler with zigzag Hamiltonian dynamics"};
  app.require_subcommand(1);

  auto* sample = app.add_subcommand("sample", "Sample the posterior");
  std::string tree_path, traits_path, config_path, out_dir = "out";
  double highlight = 0.0;
  sample->add_option("--tree", tree_path, "Newick tree file")->required();
  sample->add_option("--traits", traits_path, "trait CSV")->required();
  sample->add_option("--config", config_path, "JSON config")->required();
  sample->add_option("--out", out_dir, "output directory");
  sample->add_option("--highlight", highlight,
                     "flag parameters with |median| above this value");

  auto* bench = app.add_subcommand("benchmark", "Run a built-in benchmark");
  std::string target = "orthant256", sampler = "zigzag", bench_out = "bench.csv";
  long iters = 2000;
  std::uint64_t seed = 1;
  double lambda_ref = 1.4;
  int n_taxa = 100;
  bench->add_option("--target", target, "orthant256 | simulated-phylo");
  bench->add_option("--sampler", sampler,
                    "zigzag | bps | lg-hmc | lg-nuts | alternate-gibbs");
  bench->add_option("--iters", iters, "post-warmup iterations");
  bench->add_option("--seed", seed, "RNG seed");
  bench->add_option("--lambda-ref", lambda_ref, "BPS refreshment rate");
  bench->add_option("--taxa", n_taxa, "taxa for simulated-phylo");
  bench->add_option("--out", bench_out, "output CSV");

  auto* summ = app.add_subcommand("summarize", "Summarize chain CSV files");
  std::vector<std::string> chain_paths;
  std::string summ_out = "summary.json", trace_out;
  double summ_highlight = 0.0;
  summ->add_option("chains", chain_paths, "chain CSV files")->required();
  summ->add_option("--out", summ_out, "summary JSON path");
  summ->add_option("--highlight", summ_highlight,
                   "flag parameters with |median| above this value");
  summ->add_option("--trace-out", trace_out, "long-format trace CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sample->parsed())
      return run_sample(tree_path, traits_path, config_path, out_dir,
                        highlight);
    if (bench->parsed())
      return run_benchmark(target, sampler, iters, seed, lambda_ref, n_taxa,
                           bench_out);
    return run_summarize(chain_paths, summ_out, summ_highlight, trace_out);
  } catch (const phzz::ConfigError& e) {
    phzz::write_error_json(std::cerr, "config", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    phzz::write_error_json(std::cerr, "config", e.what());
    return 1;
  } catch (const phzz::DataError& e) {
    phzz::write_error_json(std::cerr, "data", e.what());
    return 2;
  } catch (const phzz::NewickError& e) {
    phzz::write_error_json(std::cerr, "data", e.what());
    return 2;
  } catch (const DivergenceError& e) {
    phzz::write_error_json(std::cerr, "divergence", e.what());
    return 3;
  } catch (const phzz::ZigzagError& e) {
    phzz::write_error_json(std::cerr, "divergence", e.what());
    return 3;
  } catch (const std::exception& e) {
    phzz::write_error_json(std::cerr, "divergence", e.what());
    return 3;
  }
}
