#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <random>

#include "phzz/benchmark.hpp"
#include "phzz/io.hpp"
#include "phzz/summary.hpp"

using namespace phzz;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path(name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("config defaults and overrides") {
  ModelConfig cfg = parse_config(nlohmann::json::object(), nullptr);
  CHECK(cfg.lkj_eta == 1.0);
  CHECK(cfg.chains == 1);
  CHECK(cfg.mode == "joint");

  nlohmann::json j{{"seed", 9}, {"chains", 3}, {"iterations", 50},
                   {"mode", "alternate"}, {"latent_sampler", "bps"}};
  cfg = parse_config(j, nullptr);
  CHECK(cfg.seed == 9);
  CHECK(cfg.chains == 3);
  CHECK(cfg.iterations == 50);
  CHECK(cfg.latent_sampler == "bps");
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(parse_config({{"not_a_key", 1}}, nullptr), ConfigError);
  CHECK_THROWS_AS(parse_config({{"lkj_eta", -1.0}}, nullptr), ConfigError);
  CHECK_THROWS_AS(parse_config({{"chains", 0}}, nullptr), ConfigError);
  CHECK_THROWS_AS(parse_config({{"mode", "sideways"}}, nullptr), ConfigError);
  CHECK_THROWS_AS(parse_config({{"target_accept", 1.5}}, nullptr), ConfigError);
  CHECK_THROWS_AS(parse_config({{"chains", "two"}}, nullptr), ConfigError);
  CHECK_THROWS_AS(parse_config(nlohmann::json::array(), nullptr), ConfigError);
}

TEST_CASE("config trait typing section") {
  nlohmann::json j{{"traits",
                    {{"b", {{"kind", "binary"}}},
                     {"k", {{"kind", "categorical"},
                            {"classes", {"a", "b", "c"}}}}}}};
  TraitTyping typing;
  parse_config(j, &typing);
  REQUIRE(typing.columns.count("b") == 1);
  CHECK(typing.columns["b"].kind == TraitKind::Binary);
  REQUIRE(typing.columns.count("k") == 1);
  CHECK(typing.columns["k"].classes ==
        std::vector<std::string>{"a", "b", "c"});
  CHECK_THROWS_AS(parse_config(j, nullptr), ConfigError);
  nlohmann::json bad{{"traits", {{"b", {{"kind", "ordinal"}}}}}};
  CHECK_THROWS_AS(parse_config(bad, &typing), ConfigError);
}

TEST_CASE("trait CSV parsing") {
  TempFile f("io_test_traits.csv",
             "taxon,size,winged,diet\n"
             "t1,0.5,1,herb\n"
             "t2,NA,0,carn\n"
             "t3,-1.25,NA,NA\n");
  TraitTyping typing;
  typing.columns["winged"] = TraitSpec::binary("winged");
  typing.columns["diet"] =
      TraitSpec::categorical("diet", {"herb", "omni", "carn"});
  TraitTable tab = read_traits_csv(f.path, typing);
  REQUIRE(tab.taxa == std::vector<std::string>{"t1", "t2", "t3"});
  REQUIRE(tab.spec.traits.size() == 3);
  CHECK(tab.spec.traits[0].kind == TraitKind::Continuous);  // untyped default
  CHECK(*tab.rows[0][0].value == 0.5);
  CHECK(*tab.rows[0][1].sign == 1);
  CHECK(*tab.rows[0][2].category == 0);
  CHECK(tab.rows[1][0].missing());
  CHECK(*tab.rows[1][1].sign == -1);  // 0 maps to -1
  CHECK(*tab.rows[1][2].category == 2);
  CHECK(tab.rows[2][1].missing());
  CHECK(tab.rows[2][2].missing());
}

TEST_CASE("trait CSV errors") {
  TraitTyping typing;
  typing.columns["b"] = TraitSpec::binary("b");
  {
    TempFile f("io_test_bad1.csv", "name,b\nt1,1\n");
    CHECK_THROWS_AS(read_traits_csv(f.path, typing), DataError);
  }
  {
    TempFile f("io_test_bad2.csv", "taxon,b\nt1,2\n");
    CHECK_THROWS_AS(read_traits_csv(f.path, typing), DataError);
  }
  {
    TempFile f("io_test_bad3.csv", "taxon,b\nt1,1\nt1,0\n");
    CHECK_THROWS_AS(read_traits_csv(f.path, typing), DataError);  // dup taxon
  }
  {
    TempFile f("io_test_bad4.csv", "taxon,c\nt1,xyz\n");
    CHECK_THROWS_AS(read_traits_csv(f.path, TraitTyping{}), DataError);
  }
  {
    TempFile f("io_test_bad5.csv", "taxon,c\nt1\n");
    CHECK_THROWS_AS(read_traits_csv(f.path, TraitTyping{}), DataError);
  }
  CHECK_THROWS_AS(read_traits_csv("no_such_file.csv", typing), DataError);
}

TEST_CASE("align_to_tree reorders rows and reports mismatches") {
  TempFile f("io_test_align.csv",
             "taxon,c\nB,2.0\nA,1.0\n");
  TraitTable tab = read_traits_csv(f.path, TraitTyping{});
  Phylogeny tree = parse_newick("(A:1,B:1);");
  std::vector<TraitRow> rows = align_to_tree(tab, tree);
  CHECK(*rows[0][0].value == 1.0);  // tip A first
  CHECK(*rows[1][0].value == 2.0);

  Phylogeny other = parse_newick("(A:1,C:1);");
  CHECK_THROWS_AS(align_to_tree(tab, other), DataError);
  Phylogeny bigger = parse_newick("((A:1,B:1):1,C:1);");
  CHECK_THROWS_AS(align_to_tree(tab, bigger), DataError);
}

static PosteriorModel tiny_model(ModelConfig cfg = {}) {
  Phylogeny tree = parse_newick("((A:0.4,B:0.6):0.3,C:0.8);");
  TraitSpec spec;
  spec.traits = {TraitSpec::continuous("c"), TraitSpec::binary("b")};
  std::vector<TraitRow> rows = {
      {TraitValue::cont(0.1), TraitValue::bin(1)},
      {TraitValue::cont(-0.2), TraitValue::bin(-1)},
      {TraitValue::na(), TraitValue::bin(1)}};
  return PosteriorModel(spec, rows, tree, cfg);
}

TEST_CASE("chain CSV round trip preserves 17-digit floats") {
  PosteriorModel model = tiny_model();
  std::vector<ChainRecord> recs;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 5; ++i) {
    ChainRecord r;
    r.iteration = 100 + i;
    r.r_upper = Eigen::VectorXd(1);
    r.r_upper << std::tanh(nd(rng));
    r.d_free = Eigen::VectorXd(1);
    r.d_free << std::exp(nd(rng));
    r.log_density = -123.456789012345678 + nd(rng);
    r.accept_stat = 0.987654321;
    r.seconds = 0.001 * (i + 1);
    recs.push_back(r);
  }
  std::string path = "io_test_chain.csv";
  {
    ChainWriter w(path, model);
    for (const auto& r : recs) w.write(r);
  }
  ChainFile cf = read_chain_csv(path);
  ChainFile mem = records_to_chainfile(model, recs);
  REQUIRE(cf.columns == mem.columns);
  REQUIRE(cf.columns ==
          std::vector<std::string>{"iteration", "R.1.2", "D.1", "lp", "accept",
                                   "seconds"});
  for (std::size_t c = 0; c < cf.columns.size(); ++c) {
    REQUIRE(cf.data[c].size() == recs.size());
    for (std::size_t t = 0; t < recs.size(); ++t)
      CHECK(cf.data[c][t] == mem.data[c][t]);  // bit-exact through the file
  }
  std::remove(path.c_str());
}

TEST_CASE("read_chain_csv rejects ragged and non-numeric rows") {
  {
    TempFile f("io_test_rag.csv", "a,b\n1,2\n3\n");
    CHECK_THROWS_AS(read_chain_csv(f.path), DataError);
  }
  {
    TempFile f("io_test_nonnum.csv", "a,b\n1,x\n");
    CHECK_THROWS_AS(read_chain_csv(f.path), DataError);
  }
}

TEST_CASE("summarize_chains on synthetic draws") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  // schema: q = 2 (one R column), one D column, lp
  auto make_chain = [&](double r_center) {
    ChainFile cf;
    cf.columns = {"iteration", "R.1.2", "D.1", "lp", "accept", "seconds"};
    cf.data.resize(6);
    for (int t = 0; t < 500; ++t) {
      cf.data[0].push_back(t);
      cf.data[1].push_back(std::tanh(r_center + 0.1 * nd(rng)));
      cf.data[2].push_back(std::exp(0.05 * nd(rng)));
      cf.data[3].push_back(-10.0 + nd(rng));
      cf.data[4].push_back(1.0);
      cf.data[5].push_back(0.01);
    }
    return cf;
  };
  std::vector<ChainFile> chains = {make_chain(0.5), make_chain(0.5)};
  Summary s = summarize_chains(chains, 0.9);
  CHECK(s.n_chains == 2);
  CHECK(s.draws_per_chain == 500);
  CHECK(s.sampling_seconds == Catch::Approx(10.0).margin(1e-9));
  REQUIRE(s.partials.size() == 1);
  // q = 2: the partial correlation equals the correlation, D cancels
  CHECK(s.partials[0].median ==
        Catch::Approx(std::tanh(0.5)).margin(0.05));
  CHECK(s.max_rhat_partial < 1.05);
  CHECK(s.min_ess > 100.0);
  nlohmann::json j = summary_to_json(s, 0.2);
  CHECK(j.contains("min_ess_per_second"));
  CHECK(j["partial_correlations"][0]["highlighted"].get<bool>());

  // mixed schemas rejected
  ChainFile other = make_chain(0.5);
  other.columns[1] = "R.9.9";
  CHECK_THROWS_AS(summarize_chains({chains[0], other}), DataError);
}
