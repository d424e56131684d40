#include <cstring>
#include <filesystem>

#include <unistd.h>

#include <doctest.h>
#include <json.hpp>

#include "rttlab/error.hpp"
#include "rttlab/metrics.hpp"
#include "rttlab/transfer.hpp"
#include "synthetic.hpp"

using namespace rttlab;
namespace fs = std::filesystem;

namespace {

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TrainConfig config(int epochs, std::uint64_t seed = 0) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = seed;
  c.track_epoch_loss = false;
  return c;
}

LstmModel small_source(int layers = 2, std::uint64_t seed = 0) {
  const RttTrace src{testing::ar1(600, 0.9, 40, 5, 100 + seed), 500, "source-" + std::to_string(seed)};
  return train_specialized(src, {layers, 8, 0.5, {}}, config(2, seed)).model;
}

ErrorKind load_error(const std::string& doc) {
  try {
    load_model(doc);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("document was accepted");
  return ErrorKind::kIo;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rttlab-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("model documents round-trip bitwise") {
  const auto model = small_source(3, 1);
  const auto doc = save_model(model);
  const auto back = load_model(doc);
  CHECK(back.weights == model.weights);
  CHECK(bit_equal(back.weights.values(), model.weights.values()));
  CHECK(back.standardizer.mean == model.standardizer.mean);
  CHECK(back.standardizer.std == model.standardizer.std);
  CHECK(back.metadata == model.metadata);
  CHECK(save_model(back) == doc);
}

TEST_CASE("extreme weight values survive serialization") {
  auto model = small_source(1, 2);
  auto v = model.weights.values();
  v[0] = 5e-324;
  v[1] = -1.7976931348623157e308;
  v[2] = 0.1 + 0.2;
  v[3] = -0.0;
  const auto back = load_model(save_model(model));
  CHECK(bit_equal(back.weights.values(), model.weights.values()));
}

TEST_CASE("truncated documents are rejected") {
  const auto doc = save_model(small_source(2, 3));
  for (std::size_t cut : {std::size_t{0}, std::size_t{1}, doc.size() / 3, doc.size() / 2, doc.size() - 40,
                          doc.size() - 3}) {
    CHECK(load_error(doc.substr(0, cut)) == ErrorKind::kLoad);
  }
}

TEST_CASE("corrupted, re-versioned and mis-shaped documents are rejected") {
  const auto model = small_source(2, 4);
  const auto doc = save_model(model);

  SUBCASE("one changed digit fails the checksum") {
    auto bad = doc;
    const auto pos = bad.find("\"dense_b\"");
    REQUIRE(pos != std::string::npos);
    auto digit = bad.find_first_of("123456789", pos);
    bad[digit] = bad[digit] == '9' ? '8' : static_cast<char>(bad[digit] + 1);
    CHECK(load_error(bad) == ErrorKind::kLoad);
  }
  SUBCASE("unknown format version") {
    auto j = nlohmann::ordered_json::parse(doc);
    j["format_version"] = 2;
    CHECK(load_error(restamp_model_document(j.dump())) == ErrorKind::kLoad);
  }
  SUBCASE("three layers declared, two stored") {
    auto j = nlohmann::ordered_json::parse(doc);
    j["architecture"]["num_layers"] = 3;
    try {
      load_model(restamp_model_document(j.dump()));
      FAIL("document was accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kLoad);
      CHECK(std::string(e.what()).find("shape") != std::string::npos);
    }
  }
  SUBCASE("a weight array of the wrong length") {
    auto j = nlohmann::ordered_json::parse(doc);
    j["weights"]["dense_w"].push_back(0.5);
    CHECK(load_error(restamp_model_document(j.dump())) == ErrorKind::kLoad);
  }
  SUBCASE("restamping an untouched document changes nothing") {
    CHECK(load_model(restamp_model_document(doc)).weights == model.weights);
  }
}

TEST_CASE("fine_tune with zero epochs keeps the source weights") {
  const auto source = small_source();
  const RttTrace target{testing::ar1(300, 0.9, 70, 12, 5), 500, "target"};
  const auto r = fine_tune(source, target, {1}, config(0));
  CHECK(bit_equal(r.model.weights.values(), source.weights.values()));
  CHECK(r.model.standardizer.mean != source.standardizer.mean);
  CHECK(r.model.metadata.context == "target");
  CHECK(r.model.metadata.source_context == source.metadata.context);
}

TEST_CASE("fine_tune keeps frozen layers bit-identical and leaves the source alone") {
  const auto source = small_source(3, 6);
  const LstmModel before = source;
  const RttTrace target{testing::ar1(400, 0.9, 70, 12, 6), 500, "target"};
  for (int k : {1, 2}) {
    const auto r = fine_tune(source, target, {k}, config(15, 9));
    const auto frozen = source.weights.layer_end(k - 1);
    CHECK(bit_equal(r.model.weights.values().subspan(0, frozen), source.weights.values().subspan(0, frozen)));
    CHECK_FALSE(bit_equal(r.model.weights.values(), source.weights.values()));
  }
  CHECK(bit_equal(source.weights.values(), before.weights.values()));
}

TEST_CASE("fine_tune argument errors") {
  const auto source = small_source(2, 7);
  const RttTrace target{testing::ar1(300, 0.9, 70, 12, 7), 500, "target"};
  CHECK_THROWS_AS(fine_tune(source, target, {2}, config(1)), Error);
  CHECK_THROWS_AS(fine_tune(source, target, {-1}, config(1)), Error);
  const RttTrace flat{std::vector<double>(300, 20.0), 500, "flat"};
  try {
    fine_tune(source, flat, {1}, config(1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerateInput);
  }
}

TEST_CASE("trainable parameters strictly decrease with k_frozen") {
  const auto w = init_weights({4, 8, 0.5, {}}, 1);
  std::size_t prev = w.size() + 1;
  for (int k = 0; k < 4; ++k) {
    const auto count = ParamMask::freeze_layers(w, k).trainable_count();
    CHECK(count < prev);
    prev = count;
  }
}

TEST_CASE("train_specialized is deterministic and reports test metrics") {
  const auto raw = testing::ar1(500, 0.9, 70, 12, 8);
  const auto parts = split(raw, {0.8});
  const RttTrace train{parts.train, 500, "t"}, test{parts.test, 500, "t"};
  const auto a = train_specialized(train, {2, 8, 0.5, {}}, config(2, 3), &test);
  const auto b = train_specialized(train, {2, 8, 0.5, {}}, config(2, 3), &test);
  CHECK(a.model.weights == b.model.weights);
  CHECK(a.report.test_smape == b.report.test_smape);
  CHECK(a.report.test_smape > 0.0);
  CHECK(a.model.metadata.median_ms == median(parts.train));
  CHECK(a.report.test_smape == evaluate_model(a.model, test).smape);
}

TEST_CASE("smape_improvement sign convention on transfer results") {
  const auto source = small_source(2, 9);
  const auto raw = testing::ar1(500, 0.9, 70, 12, 9);
  const auto parts = split(raw, {0.8});
  const RttTrace train{parts.train, 500, "t"}, test{parts.test, 500, "t"};
  const auto ft = fine_tune(source, train, {1}, config(2, 1), &test);
  const auto sp = train_specialized(train, source.architecture(), config(2, 1), &test);
  const double improvement = smape_improvement(sp.report.test_smape, ft.report.test_smape);
  CHECK((improvement > 0.0) == (ft.report.test_smape < sp.report.test_smape));
}

TEST_CASE("fingerprints are standardized test splits capped in length") {
  const auto raw = testing::ar1(1000, 0.9, 40, 5, 10);
  const auto fp = make_fingerprint(raw);
  CHECK(fp == standardize(split(raw).test).values);
  const auto long_fp = make_fingerprint(testing::ar1(40000, 0.9, 40, 5, 11));
  CHECK(long_fp.size() <= kFingerprintMaxPoints);
  CHECK(long_fp.size() >= kFingerprintMaxPoints / 2);
}

TEST_CASE("library directory round-trip") {
  const auto dir = scratch_dir("library");
  const auto a = small_source(1, 12);
  const auto b = small_source(2, 13);
  ModelLibrary::add_to_directory(dir.string(), a, make_fingerprint(testing::ar1(800, 0.9, 40, 5, 12)));
  ModelLibrary::add_to_directory(dir.string(), b, make_fingerprint(testing::white_noise(800, 40, 5, 13)));
  CHECK_THROWS_AS(ModelLibrary::add_to_directory(dir.string(), a, std::vector<double>{1.0}), Error);

  const auto lib = ModelLibrary::load(dir.string());
  REQUIRE(lib.size() == 2);
  CHECK(lib.entries()[0].model.weights == a.weights);
  CHECK(lib.entries()[1].model.weights == b.weights);
  CHECK(lib.entries()[1].fingerprint == make_fingerprint(testing::white_noise(800, 40, 5, 13)));
  fs::remove_all(dir);
  CHECK_THROWS_AS(ModelLibrary::load(dir.string()), Error);
}

TEST_CASE("more target data helps the specialized model") {
  // 20% versus 80% of a 30000-sample series, both scored on the final 6000 samples.
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto raw = testing::ar1(30000, 0.9, 40, 5, 500 + seed);
    const std::vector<double> test_part(raw.end() - 6000, raw.end());
    const RttTrace test{test_part, 500, "t"};
    const RttTrace small{std::vector<double>(raw.begin(), raw.begin() + 6000), 500, "t"};
    const RttTrace large{std::vector<double>(raw.begin(), raw.begin() + 24000), 500, "t"};
    const LstmArchitecture arch{2, 8, 0.5, {}};
    const auto s = train_specialized(small, arch, config(60, seed), &test);
    const auto l = train_specialized(large, arch, config(60, seed), &test);
    wins += s.report.test_smape >= l.report.test_smape ? 1 : 0;
  }
  CHECK(wins >= 8);
}
