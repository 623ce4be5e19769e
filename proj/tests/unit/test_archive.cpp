#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include "helpers.hpp"
#include "partproto/episode_archive.hpp"
#include "partproto/npy.hpp"
#include "partproto/refine.hpp"
#include "partproto/zip_archive.hpp"

using namespace partproto;
using testing_util::TempDir;
using testing_util::thrown_kind;

namespace {

Episode minimal_episode() {
  std::mt19937_64 rng(4);
  Episode ep;
  ep.class_list = {7};
  ep.image_height = 4;
  ep.image_width = 4;
  LabelGrid mask(4, 4, std::uint8_t{0});
  mask.at(0, 0) = mask.at(0, 1) = mask.at(1, 0) = mask.at(1, 1) = 1;
  ep.support = {{LabeledGrid{testing_util::random_grid(2, 2, 4, rng), mask}}};
  ep.queries = {LabeledGrid{testing_util::random_grid(2, 2, 4, rng), mask}};
  return ep;
}

bool same_grid(const FeatureGrid& a, const FeatureGrid& b) {
  return a.height() == b.height() && a.width() == b.width() && a.channels() == b.channels() &&
         std::memcmp(a.values().data(), b.values().data(), a.values().size_bytes()) == 0;
}

bool same_episode(const Episode& a, const Episode& b) {
  if (a.class_list != b.class_list || a.image_height != b.image_height || a.image_width != b.image_width) {
    return false;
  }
  if (a.support.size() != b.support.size() || a.unlabeled.size() != b.unlabeled.size() ||
      a.queries.size() != b.queries.size()) {
    return false;
  }
  for (std::size_t c = 0; c < a.support.size(); ++c) {
    if (a.support[c].size() != b.support[c].size()) return false;
    for (std::size_t k = 0; k < a.support[c].size(); ++k) {
      if (!same_grid(a.support[c][k].features, b.support[c][k].features)) return false;
      if (!(a.support[c][k].mask == b.support[c][k].mask)) return false;
    }
  }
  for (std::size_t i = 0; i < a.unlabeled.size(); ++i) {
    if (!same_grid(a.unlabeled[i], b.unlabeled[i])) return false;
  }
  for (std::size_t j = 0; j < a.queries.size(); ++j) {
    if (!same_grid(a.queries[j].features, b.queries[j].features)) return false;
    if (!(a.queries[j].mask == b.queries[j].mask)) return false;
  }
  return true;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("minimal episode archive holds five arrays and a manifest") {
  TempDir dir("archive");
  const auto path = dir.path / "ep.npz";
  write_episode_archive(minimal_episode(), path);
  std::set<std::string> names;
  for (const auto& e : zip::read(path)) names.insert(e.name);
  CHECK(names == std::set<std::string>{"support_feat_0_0.npy", "support_mask_0_0.npy", "query_feat_0.npy",
                                       "query_mask_0.npy", "class_list.npy", "manifest.json"});
}

TEST_CASE("episode archives round-trip bit-exactly") {
  TempDir dir("archive");
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SynthConfig c;
    c.channels = 5;
    c.grid_height = 6;
    c.grid_width = 7;
    c.n_way = 2;
    c.k_shot = 2;
    c.n_unlabeled = 3;
    c.n_query = 2;
    c.seed = seed;
    const Episode ep = generate_synthetic_episode(c);
    const auto path = dir.path / ("ep" + std::to_string(seed) + ".npz");
    write_episode_archive(ep, path);
    const Episode back = read_episode_archive(path);
    CHECK(same_episode(ep, back));
    // Writing the read episode again reproduces the file byte for byte.
    const auto again = dir.path / "again.npz";
    write_episode_archive(back, again);
    CHECK(slurp(path) == slurp(again));
  }
}

TEST_CASE("writing an invalid episode is rejected") {
  TempDir dir("archive");
  Episode ep = minimal_episode();
  std::mt19937_64 rng(1);
  ep.unlabeled.push_back(testing_util::random_grid(2, 2, 3, rng));  // wrong channel count
  CHECK(thrown_kind([&] { write_episode_archive(ep, dir.path / "bad.npz"); }) == ErrorKind::kInvalidEpisode);
  CHECK_FALSE(std::filesystem::exists(dir.path / "bad.npz"));

  Episode no_class = minimal_episode();
  no_class.support[0][0].mask = LabelGrid(4, 4, std::uint8_t{0});
  CHECK(thrown_kind([&] { validate(no_class); }) == ErrorKind::kInvalidEpisode);
}

TEST_CASE("corrupt archives are reported as malformed") {
  TempDir dir("archive");
  const auto path = dir.path / "ep.npz";
  write_episode_archive(minimal_episode(), path);
  const std::string bytes = slurp(path);

  SUBCASE("truncated") {
    for (std::size_t keep : {bytes.size() / 2, bytes.size() - 10, std::size_t{10}}) {
      std::ofstream(dir.path / "cut.npz", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(keep));
      CHECK(thrown_kind([&] { read_episode_archive(dir.path / "cut.npz"); }) == ErrorKind::kMalformedArchive);
    }
  }
  SUBCASE("flipped payload byte") {
    std::string bad = bytes;
    bad[100] = static_cast<char>(bad[100] ^ 0x5A);
    std::ofstream(dir.path / "flip.npz", std::ios::binary) << bad;
    CHECK(thrown_kind([&] { read_episode_archive(dir.path / "flip.npz"); }) == ErrorKind::kMalformedArchive);
  }
  SUBCASE("missing file") {
    CHECK(thrown_kind([&] { read_episode_archive(dir.path / "nope.npz"); }) == ErrorKind::kIoError);
  }
}

TEST_CASE("big-endian and Fortran-order arrays are rejected") {
  TempDir dir("archive");
  const auto path = dir.path / "ep.npz";
  write_episode_archive(minimal_episode(), path);
  for (const auto& [from, to] : std::vector<std::pair<std::string, std::string>>{
           {"'<f4'", "'>f4'"}, {"'fortran_order': False", "'fortran_order': True "}}) {
    auto entries = zip::read(path);
    for (auto& e : entries) {
      if (e.name != "query_feat_0.npy") continue;
      const auto at = e.data.find(from);
      REQUIRE(at != std::string::npos);
      e.data.replace(at, from.size(), to);
    }
    zip::write(dir.path / "edited.npz", entries);
    CHECK(thrown_kind([&] { read_episode_archive(dir.path / "edited.npz"); }) == ErrorKind::kMalformedArchive);
  }
}

TEST_CASE("missing entries and manifest problems are malformed") {
  TempDir dir("archive");
  const auto path = dir.path / "ep.npz";
  write_episode_archive(minimal_episode(), path);
  const auto entries = zip::read(path);
  for (const std::string drop : {"query_mask_0.npy", "manifest.json", "class_list.npy"}) {
    std::vector<zip::Entry> kept;
    for (const auto& e : entries) {
      if (e.name != drop) kept.push_back(e);
    }
    zip::write(dir.path / "partial.npz", kept);
    CHECK(thrown_kind([&] { read_episode_archive(dir.path / "partial.npz"); }) == ErrorKind::kMalformedArchive);
  }
  std::vector<zip::Entry> versioned = entries;
  for (auto& e : versioned) {
    if (e.name == "manifest.json") {
      const auto at = e.data.find("\"format_version\": 1");
      REQUIRE(at != std::string::npos);
      e.data.replace(at, 19, "\"format_version\": 2");
    }
  }
  zip::write(dir.path / "v2.npz", versioned);
  CHECK(thrown_kind([&] { read_episode_archive(dir.path / "v2.npz"); }) == ErrorKind::kMalformedArchive);
}

TEST_CASE("npy encoding") {
  const std::vector<float> v{1.5f, -2.0f, 0.25f, 8.0f, 3.0f, 1e-3f};
  const std::string bytes = npy::encode(npy::from_floats({2, 3}, v));
  CHECK(bytes.substr(0, 6) == "\x93NUMPY");
  CHECK(bytes[6] == 1);
  CHECK(bytes[7] == 0);
  CHECK((bytes.size() - v.size() * 4) % 64 == 0);
  const npy::Array back = npy::decode(bytes);
  CHECK(back.shape == std::vector<std::size_t>{2, 3});
  CHECK(npy::to_floats(back) == v);
  CHECK(thrown_kind([&] { npy::to_u8(back); }) == ErrorKind::kMalformedArchive);
  CHECK(thrown_kind([&] { npy::decode(bytes.substr(0, bytes.size() - 1)); }) == ErrorKind::kMalformedArchive);
  CHECK(thrown_kind([&] { npy::decode("NUMPY"); }) == ErrorKind::kMalformedArchive);
}

TEST_CASE("mask and weight archives round-trip") {
  TempDir dir("archive");
  LabelGrid mask(3, 5, std::uint8_t{0});
  mask.at(1, 2) = 4;
  mask.at(2, 4) = kIgnoreLabel;
  write_mask_archive(mask, dir.path / "mask.npz");
  CHECK(read_mask_archive(dir.path / "mask.npz") == mask);

  MessageWeights w = MessageWeights::scaled_identity(4, 0.3f);
  w.matrix[1] = -0.25f;
  write_weights_archive(w, dir.path / "w.npz");
  const MessageWeights back = read_weights_archive(dir.path / "w.npz");
  CHECK(back.dim == 4);
  CHECK(back.matrix == w.matrix);
  CHECK_FALSE(back.nonparametric);
  CHECK(thrown_kind([&] { read_weights_archive(dir.path / "mask.npz"); }) == ErrorKind::kMalformedArchive);
}

#ifdef PARTPROTO_PYTHON
TEST_CASE("archives interoperate with numpy") {
  TempDir dir("archive");
  const auto probe = std::string(PARTPROTO_PYTHON) + " -c \"import numpy\" > /dev/null 2>&1";
  if (std::system(probe.c_str()) != 0) {
    MESSAGE("numpy unavailable; skipping");
    return;
  }
  // numpy writes an archive the way an external exporter would.
  const auto script = dir.path / "make.py";
  std::ofstream(script) << R"PY(
import io, json, sys, zipfile
import numpy as np
rng = np.random.default_rng(0)
out = sys.argv[1]
mask = np.zeros((8, 8), dtype=np.uint8); mask[2:6, 1:5] = 1
arrays = {
  "support_feat_0_0": rng.standard_normal((4, 4, 6)).astype("<f4"),
  "support_mask_0_0": mask,
  "unlabeled_feat_0": rng.standard_normal((4, 4, 6)).astype("<f4"),
  "query_feat_0": rng.standard_normal((4, 4, 6)).astype("<f4"),
  "query_mask_0": mask,
  "class_list": np.array([12], dtype="<i4"),
}
with zipfile.ZipFile(out, "w", compression=zipfile.ZIP_DEFLATED if len(sys.argv) > 2 else zipfile.ZIP_STORED) as z:
  for name, a in arrays.items():
    buf = io.BytesIO(); np.lib.format.write_array(buf, a, version=(1, 0))
    z.writestr(name + ".npy", buf.getvalue())
  z.writestr("manifest.json", json.dumps({"format_version": 1, "kind": "episode", "image_size": [8, 8],
                                          "entries": [n + ".npy" for n in arrays]}))
np.save(out + ".query.npy", arrays["query_feat_0"])
)PY";
  const auto py = std::string(PARTPROTO_PYTHON) + " " + script.string() + " ";
  for (const char* extra : {"", " deflate"}) {
    const auto npz = dir.path / (std::string("py") + (extra[0] ? "_z" : "") + ".npz");
    REQUIRE(std::system((py + npz.string() + extra).c_str()) == 0);
    const Episode ep = read_episode_archive(npz);
    CHECK(ep.class_list == std::vector<std::int32_t>{12});
    CHECK(ep.unlabeled.size() == 1);
    CHECK(ep.image_height == 8);
    std::ifstream raw(npz.string() + ".query.npy", std::ios::binary);
    const std::string npy_bytes{std::istreambuf_iterator<char>(raw), std::istreambuf_iterator<char>()};
    const auto q = npy::to_floats(npy::decode(npy_bytes));
    CHECK(std::memcmp(q.data(), ep.queries[0].features.values().data(), q.size() * 4) == 0);
  }

  // numpy reads what this library writes.
  const auto ours = dir.path / "ours.npz";
  const Episode mine = testing_util::small_episode(3);
  write_episode_archive(mine, ours);
  const auto check = dir.path / "check.py";
  std::ofstream(check) << R"PY(
import json, sys, zipfile
import numpy as np
with np.load(sys.argv[1]) as z:
  f = z["query_feat_0"]; m = z["query_mask_0"]; c = z["class_list"]
  assert f.dtype == np.dtype("<f4") and f.flags.c_contiguous and f.ndim == 3
  assert m.dtype == np.uint8 and c.dtype == np.dtype("<i4")
  print(f.shape[0], f.shape[1], f.shape[2], float(f[1, 2, 3]).hex())
man = json.loads(zipfile.ZipFile(sys.argv[1]).read("manifest.json"))
assert man["format_version"] == 1
)PY";
  const auto report = dir.path / "report.txt";
  REQUIRE(std::system((std::string(PARTPROTO_PYTHON) + " " + check.string() + " " + ours.string() + " > " +
                       report.string())
                          .c_str()) == 0);
  std::ifstream in(report);
  std::size_t h = 0, w = 0, c = 0;
  std::string hex;
  in >> h >> w >> c >> hex;
  const auto& q = mine.queries[0].features;
  CHECK(h == q.height());
  CHECK(w == q.width());
  CHECK(c == q.channels());
  CHECK(std::strtod(hex.c_str(), nullptr) == static_cast<double>(q.cell(1, 2)[3]));
}
#endif
