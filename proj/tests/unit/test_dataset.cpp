#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "../support/oracles.hpp"
#include "vaproto/dataset.hpp"

using namespace vaproto;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "vaproto-dataset-tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_lines(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size() || a.dim() != b.dim() || a.split() != b.split() ||
      a.label_count() != b.label_count()) {
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ea = a.examples()[i];
    const auto& eb = b.examples()[i];
    if (ea.features != eb.features) return false;
    if (a.label_name(ea.label) != b.label_name(eb.label)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("synthetic generator basics") {
  // zero noise collapses every label onto its center
  const Dataset flat = generate_synthetic(3, 5, 4, 2.0, 0.0, 9);
  for (std::uint32_t l = 0; l < flat.label_count(); ++l) {
    const auto& idx = flat.examples_of(l);
    for (std::size_t i : idx) {
      CHECK(flat.examples()[i].features == flat.examples()[idx[0]].features);
    }
    CHECK(l2_norm(flat.examples()[idx[0]].features) == doctest::Approx(2.0).epsilon(1e-12));
  }

  // fixed seed reproduces bit-identical data
  const Dataset a = generate_synthetic(4, 10, 8, 5.0, 1.0, 77);
  const Dataset b = generate_synthetic(4, 10, 8, 5.0, 1.0, 77);
  CHECK(datasets_equal(a, b));
  const Dataset c = generate_synthetic(4, 10, 8, 5.0, 1.0, 78);
  CHECK_FALSE(datasets_equal(a, c));

  CHECK_THROWS_AS(generate_synthetic(0, 1, 1, 1.0, 0.0, 0), UsageError);
  CHECK_THROWS_AS(generate_synthetic(1, 1, 1, -1.0, 0.0, 0), UsageError);
}

TEST_CASE("well separated synthetic data is nearest-center solvable") {
  const Dataset ds = generate_synthetic(4, 250, 16, 10.0, 0.1, 5);
  std::vector<Vector> centers(ds.label_count());
  for (std::uint32_t l = 0; l < ds.label_count(); ++l) {
    Vector m(ds.dim(), 0.0);
    for (std::size_t i : ds.examples_of(l)) {
      for (std::size_t d = 0; d < ds.dim(); ++d) m[d] += ds.examples()[i].features[d];
    }
    for (double& x : m) x /= static_cast<double>(ds.examples_of(l).size());
    centers[l] = std::move(m);
  }
  std::size_t checked = 0;
  for (const auto& ex : ds.examples()) {
    CHECK(oracles::nearest_center(ex.features, centers) == ex.label);
    if (++checked >= 1000) break;
  }
  CHECK(checked == 1000);
}

TEST_CASE("jsonl round trip is lossless") {
  const Dataset ds = generate_synthetic(3, 20, 6, 4.0, 0.7, 123, Split::MetaVal, "round");
  const auto path = temp_file("roundtrip.jsonl");
  save_dataset(ds, path, FileFormat::Jsonl);
  const Dataset back = load_dataset(path, FileFormat::Jsonl);
  CHECK(datasets_equal(ds, back));
  CHECK(back.split() == Split::MetaVal);
  REQUIRE(back.synthetic_spec().has_value());
  CHECK(back.synthetic_spec()->seed == 123);
}

TEST_CASE("csv round trip is lossless") {
  const Dataset ds = generate_synthetic(2, 15, 5, 3.0, 0.4, 321);
  const auto path = temp_file("roundtrip.csv");
  save_dataset(ds, path, FileFormat::Csv);
  const Dataset back = load_dataset(path, FileFormat::Csv);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.examples()[i].features == back.examples()[i].features);
  }
}

TEST_CASE("jsonl loader smoke and errors") {
  const auto ok = temp_file("ok.jsonl");
  write_lines(ok,
              R"({"label": "a", "features": [1, 2, 3]})"
              "\n"
              R"({"label": "b", "features": [4, 5, 6]})"
              "\n");
  const Dataset ds = load_dataset(ok, FileFormat::Jsonl);
  CHECK(ds.size() == 2);
  CHECK(ds.label_count() == 2);
  CHECK(ds.dim() == 3);

  const auto ragged = temp_file("ragged.jsonl");
  write_lines(ragged,
              R"({"label": "a", "features": [1, 2, 3, 4]})"
              "\n"
              R"({"label": "b", "features": [1, 2]})"
              "\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_dataset(ragged, FileFormat::Jsonl)),
                       doctest::Contains("record 2"), DataError);

  const auto empty = temp_file("empty.jsonl");
  write_lines(empty, "");
  CHECK_THROWS_AS(static_cast<void>(load_dataset(empty, FileFormat::Jsonl)), DataError);

  const auto garbled = temp_file("garbled.jsonl");
  write_lines(garbled, "{not json\n");
  CHECK_THROWS_AS(static_cast<void>(load_dataset(garbled, FileFormat::Jsonl)), DataError);

  CHECK_THROWS_AS(static_cast<void>(load_dataset(temp_file("missing.jsonl"), FileFormat::Jsonl)),
                  DataError);
}

TEST_CASE("csv loader requires the header") {
  const auto bad = temp_file("noheader.csv");
  write_lines(bad, "a,1,2\nb,3,4\n");
  CHECK_THROWS_AS(static_cast<void>(load_dataset(bad, FileFormat::Csv)), DataError);

  const auto ragged = temp_file("ragged.csv");
  write_lines(ragged, "label,f1,f2\na,1,2\nb,3\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_dataset(ragged, FileFormat::Csv)),
                       doctest::Contains(":3"), DataError);
}

TEST_CASE("label interning follows first appearance") {
  const auto path = temp_file("intern.jsonl");
  write_lines(path,
              R"({"label": "z", "features": [1]})"
              "\n"
              R"({"label": "a", "features": [2]})"
              "\n"
              R"({"label": "z", "features": [3]})"
              "\n");
  const Dataset ds = load_dataset(path, FileFormat::Jsonl);
  CHECK(ds.label_name(0) == "z");
  CHECK(ds.label_name(1) == "a");
  CHECK(ds.examples_of(0).size() == 2);
}

TEST_CASE("label disjointness guard") {
  Dataset a("a", Split::MetaTrain);
  a.add_example("shared", {1.0});
  Dataset b("b", Split::MetaVal);
  b.add_example("other", {1.0});
  CHECK_NOTHROW(ensure_label_disjoint(a, b));
  b.add_example("shared", {2.0});
  CHECK_THROWS_WITH_AS(ensure_label_disjoint(a, b), doctest::Contains("shared"),
                       UsageError);
}
