#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "snesep/io.hpp"
#include "test_util.hpp"

using namespace snesep;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("snesep_io_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& body) const {
    std::ofstream(path(name)) << body;
  }

  fs::path dir_;
};

std::size_t count_lines(const std::string& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);) ++n;
  return n;
}

}  // namespace

using Io = TempDir;

TEST_F(Io, DatasetRoundTripIsExact) {
  GeneratorSpec spec;
  spec.n = 3;
  spec.a = 4;
  spec.dim = 5;
  spec.seed = 1;
  const Dataset ds = generate(spec);
  write_dataset_csv(path("d.csv"), ds);
  EXPECT_EQ(count_lines(path("d.csv")), 13u);
  std::ifstream in(path("d.csv"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "cluster,c0,c1,c2,c3,c4");
  const Dataset back = read_dataset_csv(path("d.csv"));
  EXPECT_EQ(back.points(), ds.points());
  EXPECT_EQ(back.labels(), ds.labels());
}

TEST_F(Io, EmbeddingRoundTrip) {
  std::mt19937_64 rng(1);
  const Embedding e(fixtures::gaussian_matrix(rng, 4, 2));
  write_embedding_csv(path("e.csv"), e, {0, 0, 1, 1});
  auto [back, labels] = read_embedding_csv(path("e.csv"));
  EXPECT_EQ(back.coords(), e.coords());
  EXPECT_EQ(labels, (std::vector<ClusterId>{0, 0, 1, 1}));
}

TEST_F(Io, MalformedFiles) {
  write("bad_header.csv", "label,c0\n0,1\n0,2\n");
  EXPECT_THROW(read_dataset_csv(path("bad_header.csv")), ValidationError);
  write("bad_col.csv", "cluster,c1\n0,1\n0,2\n");
  EXPECT_THROW(read_dataset_csv(path("bad_col.csv")), ValidationError);
  write("ragged.csv", "cluster,c0\n0,1,2\n0,2\n");
  EXPECT_THROW(read_dataset_csv(path("ragged.csv")), ValidationError);
  write("nan.csv", "cluster,c0\n0,abc\n0,2\n");
  EXPECT_THROW(read_dataset_csv(path("nan.csv")), ValidationError);
  write("frac.csv", "cluster,c0\n0.5,1\n0,2\n");
  EXPECT_THROW(read_dataset_csv(path("frac.csv")), ValidationError);
  write("empty.csv", "");
  EXPECT_THROW(read_dataset_csv(path("empty.csv")), ValidationError);
  write("dup.csv", "cluster,c0\n0,1\n0,1\n");
  EXPECT_THROW(read_dataset_csv(path("dup.csv")), ValidationError);
  EXPECT_THROW(read_dataset_csv(path("missing.csv")), IoError);
}

TEST_F(Io, ToleratesCrlfAndBom) {
  write("crlf.csv", "\xEF\xBB\xBF" "cluster,c0\r\n0,1.5\r\n0,2\r\n");
  const Dataset ds = read_dataset_csv(path("crlf.csv"));
  EXPECT_EQ(ds.points()(0, 0), 1.5);
}

TEST_F(Io, UnwritablePath) {
  EXPECT_THROW(write_json(path("no/such/dir/x.json"), json::object()), IoError);
}

TEST_F(Io, TraceAndSweepFormats) {
  OptimizationTrace t;
  t.loss_history = {3.0, 2.5};
  t.grad_norm_history = {1.0, 0.5};
  write_trace_csv(path("t.csv"), t);
  std::ifstream in(path("t.csv"));
  std::string l;
  std::getline(in, l);
  EXPECT_EQ(l, "iter,loss,grad_norm");
  std::getline(in, l);
  EXPECT_EQ(l, "0,3,1");

  SweepReport rep;
  rep.rows.push_back({0.5, 0.5, 7, 1.25, 3, false, 10.0});
  write_sweep_csv(path("s.csv"), rep);
  std::ifstream sin(path("s.csv"));
  std::getline(sin, l);
  EXPECT_EQ(l, "c,seed,Q,mismatches,contiguous");
  std::getline(sin, l);
  EXPECT_EQ(l, "0.5,7,1.25,3,false");
}

TEST_F(Io, JsonHandlesNonFinite) {
  EXPECT_EQ(num(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(num(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(num(std::nan("")), "nan");
  SeparationCertificate c;
  const json j = to_json(c);
  EXPECT_EQ(j["min_separation"], "inf");
  write_json(path("c.json"), j);
  EXPECT_EQ(read_json(path("c.json")), j);
  write("broken.json", "{");
  EXPECT_THROW(read_json(path("broken.json")), ValidationError);
}
