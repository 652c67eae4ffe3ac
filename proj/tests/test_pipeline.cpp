#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "survgen/pipeline.hpp"
#include "toy_data.hpp"

using namespace survgen;

namespace {

/// Mixed-schema survival data: one continuous driver, one categorical group
/// with its own hazard scale, exponential censoring.
SurvivalDataset mixed_survival(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  SurvivalDataset ds;
  ds.schema = {{"x", ColumnKind::continuous, {}},
               {"group", ColumnKind::categorical, {"a", "b", "c"}}};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double g = static_cast<double>(rng.below(3));
    const double scale = std::exp(0.5 + 0.3 * x - 0.4 * g);
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    const double t_event = scale * std::pow(-std::log(u), 1.0 / 1.5);
    const double t_cens = rng.exponential(0.35);
    ds.covariates.push_back({x, g});
    ds.times.push_back(std::min(t_event, t_cens));
    ds.events.push_back(t_event <= t_cens ? 1 : 0);
  }
  return ds;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.codec.max_components = 3;
  cfg.codec.time_bins = 4;
  cfg.gan.latent_dim = 8;
  cfg.gan.gen_hidden = {32, 32};
  cfg.gan.disc_hidden = {32, 32};
  cfg.gan.gen_dropout = 0.0;
  cfg.gan.disc_dropout = 0.0;
  cfg.gan.batch_size = 100;
  cfg.gan.iterations = 120;
  cfg.survival.hidden_width = 32;
  cfg.survival.hidden_layers = 1;
  cfg.survival.bins = 20;
  cfg.survival.batch_size = 128;
  cfg.survival.max_epochs = 60;
  cfg.survival.patience = 5;
  cfg.survival.dropout = 0.0;
  cfg.survival.batch_norm = false;
  cfg.regressor.n_estimators = 40;
  cfg.regressor.max_depth = 3;
  return cfg;
}

const SurvivalDataset& train_data() {
  static const SurvivalDataset ds = mixed_survival(300, 4242);
  return ds;
}

const SurvivalGanModel& shared_model() {
  static const SurvivalGanModel model =
      SurvivalGanModel::fit(train_data(), small_config(), 101);
  return model;
}

bool same_dataset(const SurvivalDataset& a, const SurvivalDataset& b) {
  return a.covariates == b.covariates && a.times == b.times &&
         a.events == b.events;
}

bool same_schema(const std::vector<ColumnSchema>& a,
                 const std::vector<ColumnSchema>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].name != b[i].name || a[i].kind != b[i].kind ||
        a[i].categories != b[i].categories)
      return false;
  return true;
}

double max_time(const SurvivalDataset& ds) {
  return *std::max_element(ds.times.begin(), ds.times.end());
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("fit produces a structurally sound generator") {
  const auto& model = shared_model();
  const auto& cfg = model.config();

  CHECK(model.diagnostics().gan_log.d_loss.size() ==
        static_cast<std::size_t>(cfg.gan.iterations));
  CHECK(!model.diagnostics().survival_val_loss.empty());
  CHECK(model.diagnostics().regressor_train_loss.size() ==
        static_cast<std::size_t>(cfg.regressor.n_estimators));

  Rng rng(5);
  const auto syn = model.generate(200, rng);
  syn.validate();
  REQUIRE(syn.size() == 200);
  CHECK(same_schema(syn.schema, train_data().schema));

  const double cap = 2.0 * max_time(train_data());
  for (std::size_t i = 0; i < syn.size(); ++i) {
    CHECK(syn.times[i] >= 0.0);
    CHECK(syn.times[i] <= cap);
    CHECK((syn.events[i] == 0 || syn.events[i] == 1));
    const double g = syn.covariates[i][1];
    CHECK(g == std::floor(g));  // decoded categorical is a class index
    CHECK(g >= 0.0);
    CHECK(g <= 2.0);
  }
}

TEST_CASE("generation is deterministic in the rng seed") {
  const auto& model = shared_model();
  Rng a(17), b(17), c(18);
  const auto da = model.generate(60, a);
  const auto db = model.generate(60, b);
  const auto dc = model.generate(60, c);
  CHECK(same_dataset(da, db));
  CHECK(!same_dataset(da, dc));
}

TEST_CASE("fitting twice with one seed yields identical models") {
  const auto again = SurvivalGanModel::fit(train_data(), small_config(), 101);
  CHECK(shared_model().to_json().dump() == again.to_json().dump());
}

TEST_CASE("generated censoring fraction tracks the training data") {
  const auto& model = shared_model();
  const double p = model.sampler().event_probability();
  Rng rng(23);
  const std::size_t m = 10000;
  const auto syn = model.generate(m, rng);
  double events = 0;
  for (int e : syn.events) events += e;
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(m));
  CHECK(std::abs(events / static_cast<double>(m) - p) < 3 * sigma);
}

TEST_CASE("explicit condition cells pin the event flag") {
  const auto& model = shared_model();
  const auto& observed = model.sampler().cells();
  const ConditionCell* with_event = nullptr;
  const ConditionCell* censored = nullptr;
  for (const auto& cell : observed) {
    if (cell.e == 1 && !with_event) with_event = &cell;
    if (cell.e == 0 && !censored) censored = &cell;
  }
  REQUIRE(with_event != nullptr);
  REQUIRE(censored != nullptr);

  std::vector<ConditionCell> cells(40, *with_event);
  std::fill(cells.begin() + 20, cells.end(), *censored);
  Rng rng(31);
  const auto syn = model.generate(cells.size(), rng, &cells);
  for (std::size_t i = 0; i < cells.size(); ++i)
    CHECK(syn.events[i] == cells[i].e);

  std::vector<ConditionCell> short_list(5, *with_event);
  CHECK_THROWS_AS(model.generate(10, rng, &short_list), std::invalid_argument);
}

TEST_CASE("generate with zero rows returns an empty shell") {
  Rng rng(1);
  const auto syn = shared_model().generate(0, rng);
  CHECK(syn.size() == 0);
  CHECK(same_schema(syn.schema, train_data().schema));
}

TEST_CASE("model json and checkpoint round trips preserve generation") {
  const auto& model = shared_model();
  const auto back = SurvivalGanModel::from_json(model.to_json());
  CHECK(back.to_json().dump() == model.to_json().dump());

  const std::string path = toy::temp_path("pipeline_model.json");
  model.save(path);
  const auto loaded = SurvivalGanModel::load(path);

  Rng a(77), b(77), c(77);
  const auto da = model.generate(80, a);
  CHECK(same_dataset(da, back.generate(80, b)));
  CHECK(same_dataset(da, loaded.generate(80, c)));
}

TEST_CASE("dropping the time regressor samples times off the horizon grid") {
  PipelineConfig cfg = small_config();
  cfg.no_time_regressor = true;
  cfg.gan.iterations = 40;
  cfg.survival.max_epochs = 25;
  const auto data = mixed_survival(150, 99);
  const auto model = SurvivalGanModel::fit(data, cfg, 7);
  CHECK(!model.to_json().contains("regressor"));

  Rng rng(3);
  const auto syn = model.generate(120, rng);
  const auto& grid = model.survival_net().grid().times;
  for (double t : syn.times) {
    double nearest = 1e300;
    for (double g : grid) nearest = std::min(nearest, std::abs(t - g));
    CHECK(nearest < 1e-12);
  }

  // the fallback survives a serialization round trip
  const auto back = SurvivalGanModel::from_json(model.to_json());
  Rng a(9), b(9);
  CHECK(same_dataset(model.generate(30, a), back.generate(30, b)));
}

TEST_CASE("unconditional ablation still trains and generates") {
  PipelineConfig cfg = small_config();
  cfg.no_conditional_gan = true;
  cfg.gan.iterations = 40;
  cfg.survival.max_epochs = 25;
  const auto data = mixed_survival(150, 123);
  const auto model = SurvivalGanModel::fit(data, cfg, 11);

  Rng rng(4);
  const auto syn = model.generate(100, rng);
  syn.validate();
  CHECK(syn.size() == 100);
  // conditions are dropped from the gan, but events still come from cells
  int events = 0;
  for (int e : syn.events) events += e;
  CHECK(events > 0);
  CHECK(events < 100);
}

TEST_CASE("stage failures name the failing stage") {
  PipelineConfig cfg = small_config();
  cfg.gan.iterations = 2;
  cfg.gan.batch_size = 10;
  cfg.survival.bins = 1;  // horizon grid needs at least two points
  const auto data = mixed_survival(20, 55);
  CHECK_THROWS_WITH_AS(SurvivalGanModel::fit(data, cfg, 3),
                       doctest::Contains("survival_net stage failed"),
                       std::runtime_error);

  SurvivalDataset empty;
  empty.schema = data.schema;
  CHECK_THROWS_WITH_AS(SurvivalGanModel::fit(empty, small_config(), 3),
                       doctest::Contains("empty"), std::invalid_argument);
}

TEST_CASE("pipeline config json round trip") {
  PipelineConfig cfg = small_config();
  cfg.sampler_mode = SamplerMode::censoring_only;
  cfg.no_time_regressor = true;
  const auto j = to_json(cfg);
  const PipelineConfig back = pipeline_config_from_json(j);
  CHECK(to_json(back).dump() == j.dump());
  CHECK(back.sampler_mode == SamplerMode::censoring_only);
  CHECK(back.gan.iterations == cfg.gan.iterations);
  CHECK(back.survival.bins == cfg.survival.bins);
}

}  // TEST_SUITE
