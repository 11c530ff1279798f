#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fptgrf/csv.hpp"
#include "fptgrf/dataset.hpp"
#include "fptgrf/errors.hpp"
#include "fptgrf/estimator.hpp"
#include "fptgrf/forest.hpp"
#include "fptgrf/random.hpp"
#include "fptgrf/serialization.hpp"
#include "fptgrf/simgen.hpp"
#include "fptgrf/tree.hpp"

namespace fptgrf {

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentGrid {
  std::vector<std::size_t> K{4};
  std::vector<std::size_t> n{4000};
  std::vector<std::size_t> num_trees{50};
  std::vector<int> settings{1};
  std::vector<SplitFlavor> flavors{SplitFlavor::fpt, SplitFlavor::grad};
  std::vector<double> corr;  // stability only
  std::size_t reps = 10;
};

struct ExperimentConfig {
  std::string experiment = "mse";
  Family family = Family::vcm;
  ExperimentGrid grid;
  std::size_t p = 5;
  std::size_t n_test = 1000;
  double sample_fraction = 0.5;
  std::size_t min_node_size = 5;
  double omega = 0.05;
  SolverKind fpt_solver = SolverKind::one_step;  // parent solver of the fpt arm
  double noise_sd = 1.0;
  std::size_t threads = 0;
  std::uint64_t seed = 1;
  std::string output;
  bool time_stage2 = false;
  bool paper_scale = false;

  void validate() const {
    if (grid.reps < 1) throw ConfigError("reps must be at least 1");
    if (grid.flavors.empty()) throw ConfigError("grid lists no flavors");
    if (experiment == "stability") {
      if (grid.corr.empty()) throw ConfigError("stability grid lists no correlations");
      if (grid.n.empty()) throw ConfigError("grid lists no sample sizes");
      return;
    }
    if (grid.K.empty() || grid.n.empty() || grid.num_trees.empty() || grid.settings.empty())
      throw ConfigError("grid must be nonempty");
    for (std::size_t b : grid.num_trees)
      if (b < 1) throw ConfigError("num_trees must be at least 1");
    if (experiment == "mse" && n_test < 1) throw ConfigError("n_test must be at least 1");
  }
};

// Desk-scale defaults, or the published grids with paper_scale.
inline ExperimentConfig default_experiment(std::string_view experiment, bool paper_scale = false) {
  ExperimentConfig c;
  c.experiment = std::string(experiment);
  c.paper_scale = paper_scale;
  if (experiment == "timing") {
    c.grid.K = paper_scale ? std::vector<std::size_t>{4, 16, 64, 256} : std::vector<std::size_t>{4, 16, 64};
    c.grid.n = paper_scale ? std::vector<std::size_t>{10000, 20000} : std::vector<std::size_t>{4000};
    c.grid.num_trees = paper_scale ? std::vector<std::size_t>{1, 50, 100} : std::vector<std::size_t>{1, 50};
    c.grid.reps = paper_scale ? 10 : 2;
  } else if (experiment == "mse") {
    c.grid.n = {paper_scale ? std::size_t{20000} : std::size_t{4000}};
    c.n_test = paper_scale ? 5000 : 1000;
    c.grid.num_trees = {paper_scale ? std::size_t{100} : std::size_t{50}};
    c.grid.reps = paper_scale ? 40 : 10;
  } else if (experiment == "stability") {
    c.grid.corr = {0.80, 0.90, 0.95, 0.99};
    c.grid.n = {1000};
    c.grid.reps = paper_scale ? 2000 : 200;
    c.fpt_solver = SolverKind::exact;
  } else if (experiment == "housing") {
    c.grid.num_trees = {2000};
    c.grid.reps = 1;
  } else if (experiment != "train" && experiment != "predict" && experiment != "simulate") {
    throw ConfigError("unknown experiment '" + std::string(experiment) + "'");
  }
  return c;
}

namespace detail {

template <class T>
std::vector<T> json_list(const Json& j, const char* key, const std::vector<T>& fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_array()) return {v.get<T>()};
  return v.get<std::vector<T>>();
}

}  // namespace detail

// Overlays a JSON document (schema version 1) on top of an existing config.
inline void apply_json(ExperimentConfig& c, const Json& j) {
  try {
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kConfigSchemaVersion)
      throw ConfigError("unsupported config schema_version");
    if (j.contains("experiment")) c.experiment = j.at("experiment").get<std::string>();
    if (j.contains("family")) c.family = parse_family(j.at("family").get<std::string>());
    if (j.contains("grid")) {
      const Json& g = j.at("grid");
      c.grid.K = detail::json_list(g, "K", c.grid.K);
      c.grid.n = detail::json_list(g, "n", c.grid.n);
      c.grid.num_trees = detail::json_list(g, "num_trees", c.grid.num_trees);
      c.grid.settings = detail::json_list(g, "settings", c.grid.settings);
      c.grid.corr = detail::json_list(g, "corr", c.grid.corr);
      if (g.contains("flavors")) {
        c.grid.flavors.clear();
        for (const auto& f : detail::json_list<std::string>(g, "flavors", {})) c.grid.flavors.push_back(parse_flavor(f));
      }
      c.grid.reps = g.value("reps", c.grid.reps);
    }
    c.p = j.value("p", c.p);
    c.n_test = j.value("n_test", c.n_test);
    c.sample_fraction = j.value("sample_fraction", c.sample_fraction);
    c.min_node_size = j.value("min_node_size", c.min_node_size);
    c.omega = j.value("omega", c.omega);
    if (j.contains("fpt_solver")) c.fpt_solver = parse_solver(j.at("fpt_solver").get<std::string>());
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.threads = j.value("threads", c.threads);
    c.seed = j.value("seed", c.seed);
    c.output = j.value("output", c.output);
    c.time_stage2 = j.value("time_stage2", c.time_stage2);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline Json to_json(const ExperimentConfig& c) {
  std::vector<std::string> flavors;
  for (auto f : c.grid.flavors) flavors.emplace_back(to_string(f));
  return {{"schema_version", kConfigSchemaVersion},
          {"experiment", c.experiment},
          {"family", to_string(c.family)},
          {"grid",
           {{"K", c.grid.K},
            {"n", c.grid.n},
            {"num_trees", c.grid.num_trees},
            {"settings", c.grid.settings},
            {"flavors", flavors},
            {"corr", c.grid.corr},
            {"reps", c.grid.reps}}},
          {"p", c.p},
          {"n_test", c.n_test},
          {"sample_fraction", c.sample_fraction},
          {"min_node_size", c.min_node_size},
          {"omega", c.omega},
          {"fpt_solver", to_string(c.fpt_solver)},
          {"noise_sd", c.noise_sd},
          {"threads", c.threads},
          {"seed", c.seed},
          {"output", c.output},
          {"time_stage2", c.time_stage2}};
}

// Forest settings for one arm. Single trees run on the full sample without
// honesty.
inline ForestConfig arm_forest_config(const ExperimentConfig& c, SplitFlavor flavor, std::size_t num_trees,
                                      std::uint64_t seed) {
  ForestConfig f;
  f.num_trees = num_trees;
  f.sample_fraction = num_trees == 1 ? 1.0 : c.sample_fraction;
  f.seed = seed;
  f.tree.flavor = flavor;
  f.tree.parent_solver = flavor == SplitFlavor::fpt ? c.fpt_solver : SolverKind::exact;
  f.tree.honesty = num_trees != 1;
  f.tree.constraints.min_node_size = c.min_node_size;
  f.tree.constraints.omega = c.omega;
  return f;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

enum : std::uint64_t { kTimingTag = 1, kMseTag = 2, kStabilityTag = 3, kHousingTag = 4 };

inline std::string cell(double v) { return csv::format_double(v); }
inline std::string cell(std::size_t v) { return std::to_string(v); }
inline std::string cell(int v) { return std::to_string(v); }

}  // namespace detail

// ---------------------------------------------------------------------------
// timing

struct TimingRow {
  Family family;
  int setting;
  SplitFlavor flavor;
  std::size_t K, n, num_trees, rep;
  double wall_seconds;
  double stage2_seconds = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<TimingRow> run_timing(const ExperimentConfig& c) {
  c.validate();
  std::vector<TimingRow> rows;
  const std::size_t threads = resolve_threads(c.threads);
  for (int setting : c.grid.settings)
    for (std::size_t K : c.grid.K)
      for (std::size_t n : c.grid.n)
        for (std::size_t B : c.grid.num_trees)
          for (std::size_t rep = 0; rep < c.grid.reps; ++rep) {
            const std::initializer_list<std::uint64_t> coords{detail::kTimingTag, static_cast<std::uint64_t>(setting), K,
                                                              n, B, rep};
            SimSpec spec{c.family, setting, n, c.p, K, derive_seed(c.seed, coords), c.noise_sd};
            const GeneratedData gen = generate(spec);
            std::optional<Matrix> queries;
            if (c.time_stage2) {
              SimSpec test_spec = spec;
              test_spec.n = c.n_test;
              test_spec.seed = derive_seed(spec.seed, {1});
              queries = generate(test_spec).data.x();
            }
            const std::uint64_t forest_seed = derive_seed(spec.seed, {2});
            for (SplitFlavor flavor : c.grid.flavors) {
              const ForestConfig fc = arm_forest_config(c, flavor, B, forest_seed);
              const auto start = std::chrono::steady_clock::now();
              const Forest forest = train_forest(gen.data, fc, threads);
              TimingRow row{c.family, setting, flavor, K, n, B, rep, detail::seconds_since(start)};
              if (queries) {
                const auto s2 = std::chrono::steady_clock::now();
                try {
                  (void)predict_batch(forest, gen.data, *queries, threads);
                  row.stage2_seconds = detail::seconds_since(s2);
                } catch (const UnidentifiedPointError&) {
                }
              }
              rows.push_back(row);
            }
          }
  return rows;
}

inline void write_timing(std::ostream& out, const std::vector<TimingRow>& rows, bool stage2) {
  std::vector<std::string> header{"experiment", "family", "setting", "flavor", "K", "n", "num_trees", "rep", "wall_seconds"};
  if (stage2) header.push_back("stage2_seconds");
  csv::write_row(out, header);
  for (const auto& r : rows) {
    std::vector<std::string> cells{"timing",
                                   std::string(to_string(r.family)),
                                   detail::cell(r.setting),
                                   std::string(to_string(r.flavor)),
                                   detail::cell(r.K),
                                   detail::cell(r.n),
                                   detail::cell(r.num_trees),
                                   detail::cell(r.rep),
                                   detail::cell(r.wall_seconds)};
    if (stage2) cells.push_back(detail::cell(r.stage2_seconds));
    csv::write_row(out, cells);
  }
}

// ---------------------------------------------------------------------------
// mse

struct MseRow {
  Family family;
  int setting;
  SplitFlavor flavor;
  std::size_t K, n, rep;
  double mse;
};

// Mean over test points of |theta* - theta_hat|^2 / K. For hte designs only
// the contrasts theta_k - theta_1 (k >= 2) are identified, so the metric is
// taken over those K - 1 contrasts.
inline double effect_mse(const Matrix& truth, const std::vector<Estimate>& est, Family family) {
  double total = 0;
  const auto K = truth.cols();
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    const Vector& th = est[static_cast<std::size_t>(i)].theta;
    if (family == Family::hte && K > 1) {
      double s = 0;
      for (Eigen::Index k = 1; k < K; ++k) {
        const double d = (th(k) - th(0)) - (truth(i, k) - truth(i, 0));
        s += d * d;
      }
      total += s / static_cast<double>(K - 1);
    } else {
      total += (th - truth.row(i).transpose()).squaredNorm() / static_cast<double>(K);
    }
  }
  return total / static_cast<double>(truth.rows());
}

inline std::vector<MseRow> run_mse(const ExperimentConfig& c) {
  c.validate();
  struct Cell {
    int setting;
    std::size_t K, n, B, rep;
  };
  std::vector<Cell> cells;
  for (int setting : c.grid.settings)
    for (std::size_t K : c.grid.K)
      for (std::size_t n : c.grid.n)
        for (std::size_t B : c.grid.num_trees)
          for (std::size_t rep = 0; rep < c.grid.reps; ++rep) cells.push_back({setting, K, n, B, rep});

  const std::size_t nf = c.grid.flavors.size();
  std::vector<MseRow> rows(cells.size() * nf);
  const std::size_t threads = resolve_threads(c.threads);
  // Cells run in parallel; each forest is single-threaded so the work split
  // never changes results.
  parallel_for(cells.size(), threads, [&](std::size_t idx) {
    const Cell& cl = cells[idx];
    const std::uint64_t base = derive_seed(
        c.seed, {detail::kMseTag, static_cast<std::uint64_t>(cl.setting), cl.K, cl.n, cl.B, cl.rep});
    Rng model_rng(derive_seed(base, {0}));
    const EffectModel model = draw_effect_model(c.family, cl.setting, c.p, cl.K, model_rng);
    Rng train_rng(derive_seed(base, {1}));
    Rng test_rng(derive_seed(base, {2}));
    const GeneratedData train = sample_from(model, cl.n, c.noise_sd, train_rng);
    const GeneratedData test = sample_from(model, c.n_test, c.noise_sd, test_rng);
    const std::uint64_t forest_seed = derive_seed(base, {3});
    for (std::size_t f = 0; f < nf; ++f) {
      const SplitFlavor flavor = c.grid.flavors[f];
      const Forest forest = train_forest(train.data, arm_forest_config(c, flavor, cl.B, forest_seed), 1);
      const auto est = predict_batch(forest, train.data, test.data.x(), 1);
      rows[idx * nf + f] = {c.family, cl.setting, flavor, cl.K, cl.n, cl.rep, effect_mse(test.theta_true, est, c.family)};
    }
  });
  return rows;
}

inline void write_mse(std::ostream& out, const std::vector<MseRow>& rows) {
  csv::write_row(out, {"family", "setting", "flavor", "K", "n", "rep", "mse"});
  for (const auto& r : rows)
    csv::write_row(out, {std::string(to_string(r.family)), detail::cell(r.setting), std::string(to_string(r.flavor)),
                         detail::cell(r.K), detail::cell(r.n), detail::cell(r.rep), detail::cell(r.mse)});
}

// ---------------------------------------------------------------------------
// stability

struct StabilityRow {
  double corr;
  std::size_t rep;
  SplitFlavor flavor;
  std::optional<std::size_t> split_feature;  // empty when the root stays a leaf
  double split_threshold = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<StabilityRow> run_stability(const ExperimentConfig& c) {
  c.validate();
  const std::size_t n = c.grid.n.front();
  const std::size_t nf = c.grid.flavors.size();
  const std::size_t reps = c.grid.reps;
  std::vector<StabilityRow> rows(c.grid.corr.size() * reps * nf);
  parallel_for(c.grid.corr.size() * reps, resolve_threads(c.threads), [&](std::size_t idx) {
    const std::size_t ci = idx / reps;
    const std::size_t rep = idx % reps;
    const double corr = c.grid.corr[ci];
    Rng data_rng(derive_seed(c.seed, {detail::kStabilityTag, ci, rep}));
    const GeneratedData gen = generate_stability(n, corr, data_rng, c.noise_sd);
    const IndexSet all = IndexSet::range(n);
    for (std::size_t f = 0; f < nf; ++f) {
      TreeConfig tc;
      tc.flavor = c.grid.flavors[f];
      tc.parent_solver = tc.flavor == SplitFlavor::fpt ? c.fpt_solver : SolverKind::exact;
      tc.constraints.min_node_size = c.min_node_size;
      tc.constraints.omega = c.omega;
      Rng split_rng(derive_seed(c.seed, {detail::kStabilityTag, ci, rep, 1}));
      StabilityRow row{corr, rep, tc.flavor, std::nullopt};
      if (auto split = fit_stump(gen.data, all, tc, split_rng)) {
        row.split_feature = split->feature;
        row.split_threshold = split->threshold;
      }
      rows[idx * nf + f] = row;
    }
  });
  return rows;
}

inline void write_stability(std::ostream& out, const std::vector<StabilityRow>& rows) {
  csv::write_row(out, {"corr", "rep", "flavor", "split_feature", "split_threshold"});
  for (const auto& r : rows)
    csv::write_row(out, {detail::cell(r.corr), detail::cell(r.rep), std::string(to_string(r.flavor)),
                         r.split_feature ? detail::cell(*r.split_feature) : std::string("NA"),
                         r.split_feature ? detail::cell(r.split_threshold) : std::string("NA")});
}

// ---------------------------------------------------------------------------
// housing

struct HousingRecord {
  double value, income, age, rooms, bedrooms, population, households, latitude, longitude;
};

inline constexpr const char* kHousingColumns[] = {"median_house_value", "median_income", "housing_median_age",
                                                  "total_rooms",        "total_bedrooms", "population",
                                                  "households",         "latitude",      "longitude"};

namespace detail {

inline std::vector<std::string> split_whitespace(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

inline HousingRecord housing_record(const std::vector<double>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
}

}  // namespace detail

// Reads either the raw StatLib file (free-text preamble, then nine
// whitespace-separated numbers per line in kHousingColumns order) or a
// comma-separated file whose header names those columns.
inline std::vector<HousingRecord> read_housing(std::istream& in) {
  std::vector<HousingRecord> records;
  std::string line;
  std::optional<std::vector<std::size_t>> csv_map;
  bool data_started = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    if (!data_started && !csv_map && line.find(',') != std::string::npos) {
      const auto header = csv::split_line(line);
      std::vector<std::size_t> map;
      for (const char* name : kHousingColumns) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) break;
        map.push_back(static_cast<std::size_t>(it - header.begin()));
      }
      if (map.size() == 9) {
        csv_map = std::move(map);
        data_started = true;
        continue;
      }
    }
    std::vector<double> v;
    if (csv_map) {
      const auto cells = csv::split_line(line);
      for (std::size_t j : *csv_map) {
        if (j >= cells.size()) throw DataError("housing line " + std::to_string(line_no) + " is short");
        auto d = csv::parse_double(cells[j]);
        if (!d) throw DataError("housing line " + std::to_string(line_no) + ": non-numeric cell");
        v.push_back(*d);
      }
    } else {
      const auto tokens = detail::split_whitespace(line);
      bool numeric = tokens.size() == 9;
      for (const auto& t : tokens) {
        if (!numeric) break;
        auto d = csv::parse_double(t);
        if (!d) numeric = false;
        else v.push_back(*d);
      }
      if (!numeric) {
        if (data_started) throw DataError("housing line " + std::to_string(line_no) + " is malformed");
        continue;  // preamble text
      }
      data_started = true;
    }
    records.push_back(detail::housing_record(v));
  }
  if (records.empty()) throw DataError("housing file contains no records");
  return records;
}

// Y = log value; W = (age, log rooms, log bedrooms, log population,
// log households, log income); X = (latitude, longitude).
inline Dataset housing_dataset(const std::vector<HousingRecord>& records) {
  const auto n = static_cast<Eigen::Index>(records.size());
  Matrix x(n, 2);
  RowMatrix w(n, 6);
  Vector y(n);
  auto log_pos = [](double v, const char* name, Eigen::Index i) {
    if (!(v > 0.0))
      throw DataError(std::string("non-positive ") + name + " at record " + std::to_string(i) + " under a log transform");
    return std::log(v);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const HousingRecord& r = records[static_cast<std::size_t>(i)];
    x(i, 0) = r.latitude;
    x(i, 1) = r.longitude;
    w(i, 0) = r.age;
    w(i, 1) = log_pos(r.rooms, "total_rooms", i);
    w(i, 2) = log_pos(r.bedrooms, "total_bedrooms", i);
    w(i, 3) = log_pos(r.population, "population", i);
    w(i, 4) = log_pos(r.households, "households", i);
    w(i, 5) = log_pos(r.income, "median_income", i);
    y(i) = log_pos(r.value, "median_house_value", i);
  }
  return Dataset(std::move(x), std::move(w), std::move(y), ModelKind::vcm);
}

inline Dataset load_housing(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open housing file " + path);
  return housing_dataset(read_housing(in));
}

struct HousingArm {
  SplitFlavor flavor;
  double wall_seconds;
  std::vector<Estimate> oob;  // one per census block
};

struct HousingResult {
  Matrix x;  // lat, lon
  std::vector<HousingArm> arms;
};

inline HousingResult run_housing(const Dataset& data, const ExperimentConfig& c) {
  c.validate();
  HousingResult result;
  result.x = data.x();
  const std::size_t threads = resolve_threads(c.threads);
  const std::uint64_t forest_seed = derive_seed(c.seed, {detail::kHousingTag});
  for (SplitFlavor flavor : c.grid.flavors) {
    const ForestConfig fc = arm_forest_config(c, flavor, c.grid.num_trees.front(), forest_seed);
    const auto start = std::chrono::steady_clock::now();
    const Forest forest = train_forest(data, fc, threads);
    const double wall = detail::seconds_since(start);
    result.arms.push_back({flavor, wall, predict_oob_all(forest, data, threads)});
  }
  return result;
}

inline void write_housing_estimates(std::ostream& out, const HousingResult& r) {
  std::vector<std::string> header{"flavor", "lat", "lon"};
  for (int k = 1; k <= 6; ++k) header.push_back("theta_" + std::to_string(k));
  header.push_back("nu");
  header.push_back("contributing");
  csv::write_row(out, header);
  for (const auto& arm : r.arms)
    for (std::size_t i = 0; i < arm.oob.size(); ++i) {
      const auto& e = arm.oob[i];
      std::vector<std::string> cells{std::string(to_string(arm.flavor)),
                                     detail::cell(r.x(static_cast<Eigen::Index>(i), 0)),
                                     detail::cell(r.x(static_cast<Eigen::Index>(i), 1))};
      for (Eigen::Index k = 0; k < e.theta.size(); ++k) cells.push_back(detail::cell(e.theta(k)));
      cells.push_back(detail::cell(e.nu));
      cells.push_back(detail::cell(e.contributing));
      csv::write_row(out, cells);
    }
}

inline void write_housing_timing(std::ostream& out, const HousingResult& r) {
  csv::write_row(out, {"flavor", "wall_seconds"});
  for (const auto& arm : r.arms) csv::write_row(out, {std::string(to_string(arm.flavor)), detail::cell(arm.wall_seconds)});
}

}  // namespace fptgrf
