#include "planprobe/similarity.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "planprobe/checkpoint.hpp"
#include "planprobe/error.hpp"
#include "planprobe/rng.hpp"
#include "planprobe/svg.hpp"

namespace planprobe::similarity {

namespace {
constexpr const char* kEntityNames[] = {"enemy_tower", "enemy_base", "enemy_creep", "ally_creep"};
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw ShapeError("cosine: lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw DomainError("cosine: zero vector");
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<PairSpec> default_pairs(const env::EnvConfig& config) {
  std::map<env::SemanticClass, std::vector<std::size_t>> by_class;
  for (const auto& a : config.abilities)
    if (a.semantic_class != env::SemanticClass::NoopFiller) by_class[a.semantic_class].push_back(a.ability_id);
  std::vector<PairSpec> pairs;
  const auto& ab = config.abilities;
  for (const auto& [cls, ids] : by_class)
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = i + 1; j < ids.size(); ++j)
        pairs.push_back({ab[ids[i]].name + "~" + ab[ids[j]].name, env::kNumEntityTypes + ids[i],
                         env::kNumEntityTypes + ids[j], "similar"});
  for (auto a = by_class.begin(); a != by_class.end(); ++a)
    for (auto b = std::next(a); b != by_class.end(); ++b) {
      const auto i = a->second.front(), j = b->second.front();
      pairs.push_back({ab[i].name + "~" + ab[j].name, env::kNumEntityTypes + i, env::kNumEntityTypes + j,
                       "control"});
    }
  return pairs;
}

std::size_t row_of(const std::string& name, const env::EnvConfig& config) {
  for (std::size_t i = 0; i < env::kNumEntityTypes; ++i)
    if (name == kEntityNames[i]) return i;
  for (const auto& a : config.abilities)
    if (a.name == name) return env::kNumEntityTypes + a.ability_id;
  throw DataError("pairs: unknown embedding row '" + name + "'");
}

std::vector<PairSpec> load_pairs(const std::filesystem::path& path, const env::EnvConfig& config) {
  std::ifstream in(path);
  if (!in) throw DataError("pairs: cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("pairs: " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("pairs") || !doc["pairs"].is_array())
    throw DataError("pairs: expected an object with a 'pairs' array");
  const std::size_t rows = env::kNumEntityTypes + config.abilities.size();
  auto resolve = [&](const nlohmann::json& v) -> std::size_t {
    if (v.is_number_unsigned()) {
      const auto r = v.get<std::size_t>();
      if (r >= rows) throw DataError("pairs: row " + std::to_string(r) + " out of range");
      return r;
    }
    if (v.is_string()) return row_of(v.get<std::string>(), config);
    throw DataError("pairs: row must be a name or index");
  };
  std::vector<PairSpec> out;
  for (const auto& p : doc["pairs"]) {
    if (!p.is_object() || !p.contains("a") || !p.contains("b")) throw DataError("pairs: entry needs 'a' and 'b'");
    PairSpec s;
    s.row_a = resolve(p["a"]);
    s.row_b = resolve(p["b"]);
    s.name = p.value("name", std::to_string(s.row_a) + "~" + std::to_string(s.row_b));
    s.group = p.value("group", std::string("similar"));
    out.push_back(std::move(s));
  }
  return out;
}

double VersionSimilarity::group_mean(const std::vector<PairSpec>& pairs, const std::string& group) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].group == group) {
      sum += cosines[i];
      ++n;
    }
  return n ? sum / static_cast<double>(n) : std::nan("");
}

VersionSimilarity measure(const Matrix& table, std::uint64_t version, const std::vector<PairSpec>& pairs,
                          std::size_t baseline_samples, std::uint64_t seed) {
  VersionSimilarity out;
  out.version = version;
  for (const auto& p : pairs) {
    if (p.row_a >= table.cols() || p.row_b >= table.cols())
      throw CompatibilityError("similarity: pair '" + p.name + "' outside the " + std::to_string(table.cols()) +
                               "-row table");
    out.cosines.push_back(cosine(table.col(p.row_a), table.col(p.row_b)));
  }
  if (table.cols() >= 2 && baseline_samples > 0) {
    Rng rng(seed);
    double sum = 0.0, sq = 0.0;
    for (std::size_t s = 0; s < baseline_samples; ++s) {
      const auto a = rng.uniform_int(table.cols());
      auto b = rng.uniform_int(table.cols() - 1);
      if (b >= a) ++b;
      const double c = cosine(table.col(a), table.col(b));
      sum += c;
      sq += c * c;
    }
    const double n = static_cast<double>(baseline_samples);
    out.baseline_mean = sum / n;
    out.baseline_std = std::sqrt(std::max(0.0, sq / n - out.baseline_mean * out.baseline_mean));
  }
  return out;
}

SimilarityTrajectory trajectory(const std::vector<std::filesystem::path>& checkpoints,
                                const std::vector<PairSpec>& pairs, std::size_t baseline_samples,
                                std::uint64_t seed) {
  if (checkpoints.empty()) throw DataError("similarity: no checkpoints");
  SimilarityTrajectory t;
  t.pairs = pairs;
  for (const auto& path : checkpoints) {
    const auto ck = persistence::read_checkpoint(path);
    const persistence::TensorRecord* table = nullptr;
    for (const auto& tensor : ck.tensors)
      if (tensor.name == "embedding.table") table = &tensor;
    if (!table || table->shape.size() != 2)
      throw CompatibilityError("similarity: " + path.string() + " has no embedding table");
    Matrix m(table->shape[0], table->shape[1]);
    std::ranges::copy(table->values, m.values().begin());
    t.versions.push_back(measure(m, ck.meta.model_version, pairs, baseline_samples, seed));
  }
  return t;
}

std::string to_csv(const SimilarityTrajectory& t) {
  std::ostringstream o;
  o << "version,pair_name,group,cosine,std\n";
  char buf[64];
  for (const auto& v : t.versions) {
    for (std::size_t i = 0; i < t.pairs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.12f", v.cosines[i]);
      o << v.version << "," << t.pairs[i].name << "," << t.pairs[i].group << "," << buf << ",0\n";
    }
    std::snprintf(buf, sizeof buf, "%.12f,%.12f", v.baseline_mean, v.baseline_std);
    o << v.version << "," << kBaselineRow << ",baseline," << buf << "\n";
  }
  return o.str();
}

std::string to_svg(const SimilarityTrajectory& t) {
  svg::Chart chart;
  chart.title = "Embedding cosine similarity across training";
  chart.x_label = "model version";
  chart.y_label = "cosine similarity";
  for (std::size_t i = 0; i < t.pairs.size(); ++i) {
    svg::Series s{t.pairs[i].name, {}, {}, t.pairs[i].group != "similar"};
    for (const auto& v : t.versions) {
      s.x.push_back(static_cast<double>(v.version));
      s.y.push_back(v.cosines[i]);
    }
    chart.series.push_back(std::move(s));
  }
  svg::Series base{"random pairs (mean)", {}, {}, true};
  for (const auto& v : t.versions) {
    base.x.push_back(static_cast<double>(v.version));
    base.y.push_back(v.baseline_mean);
  }
  chart.series.push_back(std::move(base));
  return svg::line_chart(chart);
}

}  // namespace planprobe::similarity
