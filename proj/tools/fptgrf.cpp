// fptgrf command-line front end: data simulation, forest training and
// prediction, and the benchmark experiments.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <regex>
#include <string>
#include <vector>

#include "fptgrf/fptgrf.hpp"

namespace {

using namespace fptgrf;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

// Writes to the named file, or stdout when the path is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw DataError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::vector<std::string> split_list(const std::string& s) {
  if (s.empty()) return {};
  return csv::split_line(s);
}

struct SchemaFlags {
  std::string x_cols, w_cols, y_col = "y", kind = "vcm";
  bool no_header = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--x-cols", x_cols, "Comma-separated covariate columns (names or 0-based positions)");
    cmd->add_option("--w-cols", w_cols, "Comma-separated regressor columns");
    cmd->add_option("--y-col", y_col, "Outcome column");
    cmd->add_option("--kind", kind, "Score model: mean, vcm or hte")->check(CLI::IsMember({"mean", "vcm", "hte"}));
    cmd->add_flag("--no-header", no_header, "The CSV has no header row");
  }

  // Without explicit columns, x<j>/w<k> header names are picked up.
  Dataset load(const std::string& path) const {
    CsvSchema schema;
    schema.kind = parse_model_kind(kind);
    schema.header = !no_header;
    schema.y_col = y_col;
    schema.x_cols = split_list(x_cols);
    schema.w_cols = split_list(w_cols);
    const csv::Table table = csv::read_file(path, schema.header);
    if (schema.x_cols.empty() || (schema.w_cols.empty() && schema.kind != ModelKind::mean && w_cols.empty())) {
      if (table.header.empty()) throw ConfigError("--x-cols/--w-cols are required without a header");
      const std::regex xre("x[0-9]+"), wre("w[0-9]+");
      for (const auto& h : table.header) {
        if (x_cols.empty() && std::regex_match(h, xre)) schema.x_cols.push_back(h);
        if (w_cols.empty() && schema.kind != ModelKind::mean && std::regex_match(h, wre)) schema.w_cols.push_back(h);
      }
    }
    return dataset_from_table(table, schema);
  }
};

struct ExperimentFlags {
  std::string config_path, output;
  bool paper_scale = false, time_stage2 = false;
  std::size_t threads = 0, reps = 0;
  std::uint64_t seed = 0;
  std::string family;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config overriding the defaults");
    cmd->add_option("--output,-o", output, "Output CSV (default stdout)");
    cmd->add_flag("--paper-scale", paper_scale, "Use the full published grid");
    cmd->add_option("--threads", threads, "Worker threads (default FPTGRF_THREADS or all cores)");
    cmd->add_option("--reps", reps, "Replications per grid cell");
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--family", family, "vcm or hte")->check(CLI::IsMember({"vcm", "hte"}));
  }

  ExperimentConfig resolve(CLI::App* cmd, const std::string& experiment) const {
    ExperimentConfig c = default_experiment(experiment, paper_scale);
    if (!config_path.empty()) apply_json(c, load_json(config_path));
    c.experiment = experiment;
    if (cmd->count("--output")) c.output = output;
    if (cmd->count("--threads")) c.threads = threads;
    if (cmd->count("--reps")) c.grid.reps = reps;
    if (cmd->count("--seed")) c.seed = seed;
    if (cmd->count("--family")) c.family = parse_family(family);
    if (cmd->get_option_no_throw("--time-stage2") && cmd->count("--time-stage2")) c.time_stage2 = time_stage2;
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized random forests with fixed-point and gradient tree splitting"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a simulated dataset with its true effects");
  std::string sim_family = "vcm", sim_output;
  SimSpec sim_spec;
  sim->add_option("--family", sim_family)->check(CLI::IsMember({"vcm", "hte"}));
  sim->add_option("--setting", sim_spec.setting);
  sim->add_option("--n", sim_spec.n);
  sim->add_option("--p", sim_spec.p);
  sim->add_option("--K", sim_spec.K);
  sim->add_option("--seed", sim_spec.seed);
  sim->add_option("--noise-sd", sim_spec.noise_sd);
  sim->add_option("--output,-o", sim_output);

  // train
  auto* train = app.add_subcommand("train", "Train a forest on a CSV dataset and save it as JSON");
  SchemaFlags train_schema;
  train_schema.add(train);
  std::string train_data, train_output, train_config, flavor = "fpt", solver = "exact";
  ForestConfig fc;
  bool no_honesty = false;
  std::size_t train_threads = 0;
  train->add_option("--data", train_data)->required();
  train->add_option("--output,-o", train_output)->required();
  train->add_option("--config", train_config, "JSON forest config");
  train->add_option("--flavor", flavor)->check(CLI::IsMember({"fpt", "grad"}));
  train->add_option("--solver", solver)->check(CLI::IsMember({"exact", "one_step"}));
  train->add_option("--num-trees", fc.num_trees);
  train->add_option("--sample-fraction", fc.sample_fraction);
  train->add_option("--min-node-size", fc.tree.constraints.min_node_size);
  train->add_option("--omega", fc.tree.constraints.omega);
  train->add_option("--mtry", fc.tree.constraints.mtry);
  train->add_option("--seed", fc.seed);
  train->add_flag("--no-honesty", no_honesty);
  train->add_option("--threads", train_threads);

  // predict
  auto* pred = app.add_subcommand("predict", "Stage-II estimates at query points or out of bag");
  SchemaFlags pred_schema;
  pred_schema.add(pred);
  std::string pred_forest, pred_data, pred_queries, pred_output;
  bool pred_oob = false;
  std::size_t pred_threads = 0;
  pred->add_option("--forest", pred_forest)->required();
  pred->add_option("--data", pred_data, "Training CSV the forest was fit on")->required();
  pred->add_option("--queries", pred_queries, "CSV of query covariates (same x columns)");
  pred->add_flag("--oob", pred_oob, "Out-of-bag estimates for every training row");
  pred->add_option("--output,-o", pred_output);
  pred->add_option("--threads", pred_threads);

  // experiments
  ExperimentFlags timing_flags, mse_flags, stab_flags, housing_flags;
  auto* timing = app.add_subcommand("timing", "Stage-I fit times for both flavors");
  timing_flags.add(timing);
  timing->add_flag("--time-stage2", timing_flags.time_stage2, "Also time Stage-II prediction");
  auto* mse = app.add_subcommand("mse", "Paired accuracy of both flavors against the true effects");
  mse_flags.add(mse);
  auto* stab = app.add_subcommand("stability", "Root-split stability under correlated regressors");
  stab_flags.add(stab);
  auto* housing = app.add_subcommand("housing", "California housing varying-coefficient fit");
  housing_flags.add(housing);
  std::string housing_path, housing_timing;
  std::size_t housing_trees = 0;
  housing->add_option("--data", housing_path, "Raw StatLib cadata file or headered CSV")->required();
  housing->add_option("--timing-output", housing_timing, "Timing summary CSV (default stderr)");
  housing->add_option("--num-trees", housing_trees);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) {
      sim_spec.family = parse_family(sim_family);
      const GeneratedData gen = generate(sim_spec);
      Output out(sim_output);
      const Dataset& d = gen.data;
      std::vector<std::string> cells;
      for (std::size_t j = 0; j < d.num_features(); ++j) cells.push_back("x" + std::to_string(j + 1));
      for (std::size_t k = 0; k < d.num_regressors(); ++k) cells.push_back("w" + std::to_string(k + 1));
      cells.push_back("y");
      for (std::size_t k = 0; k < d.num_regressors(); ++k) cells.push_back("theta_true_" + std::to_string(k + 1));
      for (Eigen::Index k = 0; k < gen.pi_true.cols(); ++k) cells.push_back("pi_true_" + std::to_string(k + 1));
      csv::write_row(out.stream(), cells);
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d.size()); ++i) {
        cells.clear();
        for (Eigen::Index j = 0; j < d.x().cols(); ++j) cells.push_back(csv::format_double(d.x()(i, j)));
        for (Eigen::Index k = 0; k < d.w().cols(); ++k) cells.push_back(csv::format_double(d.w()(i, k)));
        cells.push_back(csv::format_double(d.y()(i)));
        for (Eigen::Index k = 0; k < gen.theta_true.cols(); ++k) cells.push_back(csv::format_double(gen.theta_true(i, k)));
        for (Eigen::Index k = 0; k < gen.pi_true.cols(); ++k) cells.push_back(csv::format_double(gen.pi_true(i, k)));
        csv::write_row(out.stream(), cells);
      }
    } else if (*train) {
      if (!train_config.empty()) {
        ForestConfig base = forest_config_from_json(load_json(train_config));
        // Explicit flags win over the config file.
        if (!train->count("--num-trees")) fc.num_trees = base.num_trees;
        if (!train->count("--sample-fraction")) fc.sample_fraction = base.sample_fraction;
        if (!train->count("--seed")) fc.seed = base.seed;
        const SplitConstraints flags = fc.tree.constraints;
        fc.tree = base.tree;
        if (train->count("--min-node-size")) fc.tree.constraints.min_node_size = flags.min_node_size;
        if (train->count("--omega")) fc.tree.constraints.omega = flags.omega;
        if (train->count("--mtry")) fc.tree.constraints.mtry = flags.mtry;
      }
      if (train->count("--flavor") || train_config.empty()) fc.tree.flavor = parse_flavor(flavor);
      if (train->count("--solver") || train_config.empty()) fc.tree.parent_solver = parse_solver(solver);
      if (no_honesty) fc.tree.honesty = false;
      const Dataset data = train_schema.load(train_data);
      const Forest forest = train_forest(data, fc, train_threads);
      save_json(train_output, to_json(forest));
    } else if (*pred) {
      const Forest forest = forest_from_json(load_json(pred_forest));
      const Dataset data = pred_schema.load(pred_data);
      if (forest.n_train != data.size()) throw DataError("training data does not match the forest");
      std::vector<Estimate> est;
      if (pred_oob) {
        est = predict_oob_all(forest, data, pred_threads);
      } else {
        if (pred_queries.empty()) throw ConfigError("predict needs --queries or --oob");
        const csv::Table table = csv::read_file(pred_queries, !pred_schema.no_header);
        std::vector<std::size_t> cols;
        std::vector<std::string> names = split_list(pred_schema.x_cols);
        if (names.empty()) {
          const std::regex xre("x[0-9]+");
          for (const auto& h : table.header)
            if (std::regex_match(h, xre)) names.push_back(h);
        }
        for (const auto& name : names) cols.push_back(detail::resolve_column(table, name));
        Matrix queries(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t r = 0; r < table.rows.size(); ++r)
          for (std::size_t j = 0; j < cols.size(); ++j) {
            auto v = csv::parse_double(table.rows[r][cols[j]]);
            if (!v) throw DataError("non-numeric query cell at row " + std::to_string(r));
            queries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = *v;
          }
        est = predict_batch(forest, data, queries, pred_threads);
      }
      Output out(pred_output);
      write_estimates(out.stream(), est, data.num_regressors());
    } else if (*timing) {
      const ExperimentConfig c = timing_flags.resolve(timing, "timing");
      Output out(c.output);
      write_timing(out.stream(), run_timing(c), c.time_stage2);
    } else if (*mse) {
      const ExperimentConfig c = mse_flags.resolve(mse, "mse");
      Output out(c.output);
      write_mse(out.stream(), run_mse(c));
    } else if (*stab) {
      const ExperimentConfig c = stab_flags.resolve(stab, "stability");
      Output out(c.output);
      write_stability(out.stream(), run_stability(c));
    } else if (*housing) {
      ExperimentConfig c = housing_flags.resolve(housing, "housing");
      if (housing->count("--num-trees")) c.grid.num_trees = {housing_trees};
      const Dataset data = load_housing(housing_path);
      const HousingResult result = run_housing(data, c);
      Output out(c.output);
      write_housing_estimates(out.stream(), result);
      if (housing_timing.empty()) {
        write_housing_timing(std::cerr, result);
      } else {
        Output t(housing_timing);
        write_housing_timing(t.stream(), result);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
