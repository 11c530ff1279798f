#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fptgrf/fptgrf.hpp"

using namespace fptgrf;

namespace {

csv::Table parse(const std::string& text, bool header = true) {
  std::istringstream in(text);
  return csv::read(in, header);
}

CsvSchema schema_xwy() {
  CsvSchema s;
  s.x_cols = {"x1", "x2"};
  s.w_cols = {"w1"};
  s.y_col = "y";
  return s;
}

}  // namespace

TEST(Dataset, LoadsThreeRowCsv) {
  const auto data = dataset_from_table(parse("x1,x2,w1,y\n1,2,3,4\n5,6,7,8\n9,10,11,12\n"), schema_xwy());
  EXPECT_EQ(data.size(), 3u);
  EXPECT_EQ(data.num_features(), 2u);
  EXPECT_EQ(data.num_regressors(), 1u);
  EXPECT_DOUBLE_EQ(data.x()(2, 1), 10);
  EXPECT_DOUBLE_EQ(data.y()(1), 8);
}

TEST(Dataset, MissingColumnIsReported) {
  try {
    dataset_from_table(parse("x1,x2,w1\n1,2,3\n"), schema_xwy());
    FAIL() << "expected a DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("missing column"), std::string::npos);
  }
}

TEST(Dataset, RejectsNonNumericAndNonFiniteCells) {
  EXPECT_THROW(dataset_from_table(parse("x1,x2,w1,y\n1,abc,3,4\n"), schema_xwy()), DataError);
  EXPECT_THROW(dataset_from_table(parse("x1,x2,w1,y\n1,nan,3,4\n"), schema_xwy()), DataError);
  EXPECT_THROW(dataset_from_table(parse("x1,x2,w1,y\n1,2,inf,4\n"), schema_xwy()), DataError);
}

TEST(Dataset, RaggedRowsAreRejected) {
  EXPECT_THROW(parse("a,b\n1,2\n3\n"), DataError);
}

TEST(Dataset, PositionalColumnsWithoutHeader) {
  CsvSchema s;
  s.x_cols = {"0"};
  s.w_cols = {"1", "2"};
  s.y_col = "3";
  s.header = false;
  const auto data = dataset_from_table(parse("1,0,1,5\n2,1,0,6\n", false), s);
  EXPECT_EQ(data.num_regressors(), 2u);
  EXPECT_DOUBLE_EQ(data.y()(1), 6);
}

TEST(Dataset, HteRowsMustBeOneHot) {
  CsvSchema s;
  s.x_cols = {"x1"};
  s.w_cols = {"w1", "w2"};
  s.y_col = "y";
  s.kind = ModelKind::hte;
  EXPECT_NO_THROW(dataset_from_table(parse("x1,w1,w2,y\n0.1,1,0,2\n0.2,0,1,3\n"), s));
  EXPECT_THROW(dataset_from_table(parse("x1,w1,w2,y\n0.1,1,1,2\n"), s), DataError);
  EXPECT_THROW(dataset_from_table(parse("x1,w1,w2,y\n0.1,0.5,0.5,2\n"), s), DataError);
  EXPECT_THROW(dataset_from_table(parse("x1,w1,w2,y\n0.1,0,0,2\n"), s), DataError);
}

TEST(Dataset, ShapeInvariants) {
  EXPECT_THROW(Dataset(Matrix(0, 1), RowMatrix(0, 1), Vector(0), ModelKind::vcm), DataError);
  EXPECT_THROW(Dataset(Matrix(2, 0), RowMatrix(2, 1), Vector(2), ModelKind::vcm), DataError);
  EXPECT_THROW(Dataset(Matrix::Zero(2, 1), RowMatrix(2, 0), Vector::Zero(2), ModelKind::vcm), DataError);
  EXPECT_NO_THROW(Dataset(Matrix::Zero(2, 1), RowMatrix(2, 0), Vector::Zero(2), ModelKind::mean));
  EXPECT_THROW(Dataset(Matrix::Zero(3, 1), RowMatrix::Zero(2, 1), Vector::Zero(3), ModelKind::vcm), DataError);
}

TEST(Dataset, WriteThenLoadRoundTripsExactly) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Matrix x(20, 2);
  RowMatrix w(20, 3);
  Vector y(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    x.row(i) << normal(rng), normal(rng) * 1e-7;
    w.row(i) << normal(rng), normal(rng) * 1e9, 1.0 / 3.0;
    y(i) = normal(rng);
  }
  const Dataset data(x, w, y, ModelKind::vcm);
  std::stringstream buf;
  write_dataset(buf, data);
  const auto back = dataset_from_table(csv::read(buf, true), default_schema(2, 3, ModelKind::vcm));
  EXPECT_EQ(back.x(), data.x());
  EXPECT_EQ(back.w(), data.w());
  EXPECT_EQ(back.y(), data.y());
}

TEST(IndexSet, SortsAndRejectsDuplicates) {
  const IndexSet s{5, 1, 3};
  EXPECT_EQ(s.values(), (std::vector<std::size_t>{1, 3, 5}));
  EXPECT_TRUE(s.contains(3));
  EXPECT_FALSE(s.contains(4));
  EXPECT_THROW(IndexSet({1, 2, 1}), DataError);
  EXPECT_TRUE(s.disjoint_from(IndexSet{0, 2, 4}));
  EXPECT_FALSE(s.disjoint_from(IndexSet{5}));
}

TEST(Subsample, HalfOfTwenty) {
  Rng rng(1);
  const auto s = subsample(20, 0.5, rng);
  EXPECT_EQ(s.size(), 10u);
  EXPECT_TRUE(s.within(20));
}

TEST(Subsample, FullFractionReturnsAllIndices) {
  Rng rng(1);
  EXPECT_EQ(subsample(17, 1.0, rng), IndexSet::range(17));
}

TEST(Subsample, FractionOutsideRangeOrEmpty) {
  Rng rng(1);
  EXPECT_THROW(subsample(10, 0.0, rng), ConfigError);
  EXPECT_THROW(subsample(10, 1.5, rng), ConfigError);
  EXPECT_THROW(subsample(10, 0.05, rng), ConfigError);
}

TEST(Subsample, NoDuplicatesOverManyDraws) {
  Rng rng(7);
  for (int t = 0; t < 1000; ++t) {
    const auto s = subsample(50, 0.3, rng);  // IndexSet throws on duplicates
    ASSERT_EQ(s.size(), 15u);
    ASSERT_TRUE(s.within(50));
  }
}

TEST(Subsample, InclusionIsUniform) {
  Rng rng(11);
  std::vector<int> hits(10, 0);
  const int draws = 20000;
  for (int t = 0; t < draws; ++t)
    for (std::size_t i : subsample(10, 0.3, rng)) ++hits[i];
  // Each index is included with probability 0.3.
  const double sd = std::sqrt(draws * 0.3 * 0.7);
  for (int h : hits) EXPECT_NEAR(h, draws * 0.3, 4 * sd);
}

TEST(HonestPartition, SizesAndDisjointness) {
  Rng rng(5);
  for (std::size_t s : {2u, 3u, 10u, 11u, 101u}) {
    const auto sample = subsample(200, static_cast<double>(s) / 200.0, rng);
    ASSERT_EQ(sample.size(), s);
    const auto part = honest_partition(sample, rng);
    EXPECT_EQ(part.build.size(), s / 2);
    EXPECT_EQ(part.populate.size(), s - s / 2);
    EXPECT_TRUE(part.build.disjoint_from(part.populate));
    for (std::size_t i : part.build) EXPECT_TRUE(sample.contains(i));
    for (std::size_t i : part.populate) EXPECT_TRUE(sample.contains(i));
  }
  EXPECT_THROW(honest_partition(IndexSet{3}, rng), ConfigError);
}

TEST(HonestPartition, AssignmentIsUniform) {
  Rng rng(9);
  const IndexSet sample = IndexSet::range(6);
  std::vector<int> in_build(6, 0);
  const int draws = 12000;
  for (int t = 0; t < draws; ++t)
    for (std::size_t i : honest_partition(sample, rng).build) ++in_build[i];
  const double sd = std::sqrt(draws * 0.25);
  for (int h : in_build) EXPECT_NEAR(h, draws * 0.5, 4 * sd);
}

TEST(Random, DerivedSeedsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t b = 0; b < 1000; ++b) seen.insert(tree_seed(42, b));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(tree_seed(42, 7), derive_seed(42, {7}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
}
