#include "config.hpp"

#include "cli_error.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace c2st::cli {

using nlohmann::json;

namespace {

enum class Kind {
  kSection,
  kString,
  kNumber,
  kProbability,
  kBool,
  kInt,
  kNonNegativeInt,
  kPositiveInt,
  kIntList,
  kNonNegativeIntList,
  kPositiveIntList,
  kNumberList,
  kStringList,
};

const std::map<std::string, Kind>& schema() {
  static const std::map<std::string, Kind> s{
      {"profile", Kind::kString},
      {"output_dir", Kind::kString},
      {"seed", Kind::kNonNegativeInt},
      {"methods", Kind::kStringList},
      {"data", Kind::kSection},
      {"data.source", Kind::kString},
      {"data.family", Kind::kString},
      {"data.delta", Kind::kNumber},
      {"data.images", Kind::kString},
      {"data.labels", Kind::kString},
      {"data.p_classes", Kind::kNonNegativeIntList},
      {"data.q_classes", Kind::kNonNegativeIntList},
      {"harness", Kind::kSection},
      {"harness.n_all", Kind::kPositiveInt},
      {"harness.n_run", Kind::kPositiveInt},
      {"harness.n_rep", Kind::kPositiveInt},
      {"harness.m_perm", Kind::kPositiveInt},
      {"harness.alpha", Kind::kProbability},
      {"harness.retrain_per_run", Kind::kBool},
      {"harness.bandwidth_grid", Kind::kNumberList},
      {"training", Kind::kSection},
      {"training.hidden_widths", Kind::kPositiveIntList},
      {"training.epochs", Kind::kPositiveInt},
      {"training.batch_size", Kind::kPositiveInt},
      {"training.learning_rate", Kind::kNumber},
      {"training.init", Kind::kString},
      {"training.weight_clip", Kind::kNumber},
      {"gen", Kind::kSection},
      {"gen.n", Kind::kPositiveInt},
      {"train", Kind::kSection},
      {"train.x", Kind::kString},
      {"train.y", Kind::kString},
      {"test", Kind::kSection},
      {"test.method", Kind::kString},
      {"test.scores", Kind::kString},
      {"test.x", Kind::kString},
      {"test.y", Kind::kString},
      {"test.model", Kind::kString},
      {"test.sigma", Kind::kNumber},
      {"loss_curve", Kind::kSection},
      {"loss_curve.example", Kind::kInt},
      {"loss_curve.delta", Kind::kNumber},
      {"loss_curve.widths", Kind::kPositiveIntList},
      {"loss_curve.n_train", Kind::kPositiveIntList},
      {"loss_curve.n_rep", Kind::kPositiveInt},
      {"witness", Kind::kSection},
      {"witness.grid_lo", Kind::kNumber},
      {"witness.grid_hi", Kind::kNumber},
      {"witness.grid_points", Kind::kPositiveInt},
      {"witness.sigma", Kind::kNumber},
      {"witness.n_test", Kind::kPositiveInt},
      {"witness.model", Kind::kString},
      {"manifold", Kind::kSection},
      {"manifold.manifold", Kind::kString},
      {"manifold.target", Kind::kString},
      {"manifold.delta", Kind::kNumber},
      {"manifold.k_max", Kind::kNonNegativeIntList},
      {"manifold.ridge", Kind::kNumber},
      {"manifold.grid_points", Kind::kPositiveInt},
      {"manifold.n_eval", Kind::kPositiveInt},
      {"manifold.save", Kind::kBool},
  };
  return s;
}

const char* expected_form(Kind k) {
  switch (k) {
    case Kind::kSection: return "an object";
    case Kind::kString: return "a string";
    case Kind::kNumber: return "a finite number";
    case Kind::kProbability: return "a number in (0, 1)";
    case Kind::kBool: return "true or false";
    case Kind::kInt: return "an integer";
    case Kind::kNonNegativeInt: return "a nonnegative integer";
    case Kind::kPositiveInt: return "a positive integer";
    case Kind::kIntList: return "a list of integers";
    case Kind::kNonNegativeIntList: return "a list of nonnegative integers";
    case Kind::kPositiveIntList: return "a non-empty list of positive integers";
    case Kind::kNumberList: return "a list of finite numbers";
    case Kind::kStringList: return "a list of strings";
  }
  return "a value";
}

bool is_int(const json& v) { return v.is_number_integer() || v.is_number_unsigned(); }

bool matches(Kind k, const json& v) {
  auto all = [&](auto pred) { return v.is_array() && std::all_of(v.begin(), v.end(), pred); };
  switch (k) {
    case Kind::kSection: return v.is_object();
    case Kind::kString: return v.is_string();
    case Kind::kNumber: return v.is_number() && std::isfinite(v.get<double>());
    case Kind::kProbability: return v.is_number() && v.get<double>() > 0.0 && v.get<double>() < 1.0;
    case Kind::kBool: return v.is_boolean();
    case Kind::kInt: return is_int(v);
    case Kind::kNonNegativeInt: return v.is_number_unsigned() || (is_int(v) && v.get<std::int64_t>() >= 0);
    case Kind::kPositiveInt: return is_int(v) && v.get<std::int64_t>() > 0;
    case Kind::kIntList: return all([](const json& e) { return is_int(e); });
    case Kind::kNonNegativeIntList:
      return all([](const json& e) { return is_int(e) && e.get<std::int64_t>() >= 0; });
    case Kind::kPositiveIntList:
      return !v.empty() && all([](const json& e) { return is_int(e) && e.get<std::int64_t>() > 0; });
    case Kind::kNumberList:
      return all([](const json& e) { return e.is_number() && std::isfinite(e.get<double>()); });
    case Kind::kStringList: return all([](const json& e) { return e.is_string(); });
  }
  return false;
}

void walk(const json& obj, const std::string& prefix) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const auto found = schema().find(key);
    if (found == schema().end()) raise(C2ST_ERR_SCHEMA, "unknown key '" + key + "'");
    if (!matches(found->second, it.value())) {
      raise(C2ST_ERR_SCHEMA, "key '" + key + "' expects " + expected_form(found->second) + ", got " +
                                 it.value().dump());
    }
    if (found->second == Kind::kSection) walk(it.value(), key);
  }
}

void check_one_of(const std::string& key, const std::string& value, const std::vector<std::string>& allowed) {
  if (std::find(allowed.begin(), allowed.end(), value) != allowed.end()) return;
  std::string list;
  for (std::size_t i = 0; i < allowed.size(); ++i) list += (i ? ", " : "") + allowed[i];
  raise(C2ST_ERR_SCHEMA, "key '" + key + "' expects one of {" + list + "}, got \"" + value + "\"");
}

void check(bool ok, const std::string& key, const std::string& form) {
  if (!ok) raise(C2ST_ERR_SCHEMA, "key '" + key + "' expects " + form);
}

void check_ranges(const RunConfig& c) {
  check_one_of("data.source", c.data.source, {"analytic", "idx"});
  check_one_of("data.family", c.data.family, {"example1", "example2", "eg1", "eg2", "eg3", "sphere"});
  if (c.data.source == "idx") {
    check(!c.data.images.empty(), "data.images", "an IDX image path when data.source is idx");
    check(!c.data.labels.empty(), "data.labels", "an IDX label path when data.source is idx");
    check(!c.data.p_classes.empty(), "data.p_classes", "at least one class when data.source is idx");
    check(!c.data.q_classes.empty(), "data.q_classes", "at least one class when data.source is idx");
  }
  for (const auto& m : c.methods) check_one_of("methods", m, {"gmmd", "gmmd-ad", "gmmd+", "gmmd++", "net-acc", "net-logit"});
  check(!c.methods.empty(), "methods", "at least one method");
  check(c.harness.n_all >= 4 && c.harness.n_all % 2 == 0, "harness.n_all", "an even integer >= 4");
  for (double s : c.harness.bandwidth_grid) check(s > 0.0, "harness.bandwidth_grid", "positive bandwidths");
  check(!c.harness.bandwidth_grid.empty(), "harness.bandwidth_grid", "at least one bandwidth");
  check(c.training.learning_rate > 0.0, "training.learning_rate", "a positive number");
  check(c.training.weight_clip >= 0.0, "training.weight_clip", "a nonnegative number (0 disables clipping)");
  check_one_of("training.init", c.training.init, {"he", "uniform_fan_in"});
  check_one_of("test.method", c.test.method, {"net-logit", "net-acc", "gmmd"});
  check(c.test.sigma >= 0.0, "test.sigma", "a nonnegative number (0 selects the median distance)");
  check(c.loss_curve.example == 1 || c.loss_curve.example == 2, "loss_curve.example", "1 or 2");
  check(c.loss_curve.delta >= 0.0 && c.loss_curve.delta <= 1.0, "loss_curve.delta", "a number in [0, 1]");
  check(c.witness.grid_hi > c.witness.grid_lo, "witness.grid_hi", "a number above witness.grid_lo");
  check(c.witness.grid_points >= 2, "witness.grid_points", "an integer >= 2");
  check(c.witness.sigma > 0.0, "witness.sigma", "a positive number");
  check_one_of("manifold.manifold", c.manifold.manifold, {"circle", "curve", "sphere-patch"});
  check_one_of("manifold.target", c.manifold.target, {"cos-theta", "wave"});
  check(c.manifold.delta > 0.0 && c.manifold.delta < 1.0, "manifold.delta", "a number in (0, 1)");
  check(!c.manifold.k_max.empty(), "manifold.k_max", "at least one level");
  check(c.manifold.ridge >= 0.0, "manifold.ridge", "a nonnegative number");
  check(c.manifold.grid_points >= 16, "manifold.grid_points", "an integer >= 16");
  check(c.manifold.n_eval >= 100, "manifold.n_eval", "an integer >= 100");
}

Kind kind_of(const std::string& key) {
  const auto it = schema().find(key);
  if (it == schema().end()) raise(C2ST_ERR_SCHEMA, "unknown key '" + key + "'");
  if (it->second == Kind::kSection) raise(C2ST_ERR_SCHEMA, "key '" + key + "' is a section; set one of its fields");
  return it->second;
}

bool is_list(Kind k) {
  return k == Kind::kIntList || k == Kind::kNonNegativeIntList || k == Kind::kPositiveIntList ||
         k == Kind::kNumberList || k == Kind::kStringList;
}

json parse_scalar(const std::string& text, bool as_string) {
  if (as_string) return text;
  json v = json::parse(text, nullptr, false);
  return v.is_discarded() ? json(text) : v;
}

}  // namespace

std::vector<std::string> profile_names() { return {"default", "eg3-table", "eg3-reduced", "type-i", "fast"}; }

RunConfig profile_config(const std::string& name) {
  RunConfig c;
  c.profile = name;
  if (name == "default" || name == "eg3-table") return c;
  if (name == "eg3-reduced") {
    c.harness.n_run = 200;
    c.harness.n_rep = 10;
    return c;
  }
  if (name == "type-i") {
    c.data.family = "eg1";
    c.data.delta = 0.0;
    c.methods = {"gmmd", "gmmd-ad", "gmmd+", "gmmd++", "net-acc", "net-logit"};
    c.harness.n_rep = 1;
    return c;
  }
  if (name == "fast") {
    c.harness.n_run = 20;
    c.harness.n_rep = 2;
    c.harness.m_perm = 50;
    c.training.epochs = 20;
    c.gen.n = 200;
    c.loss_curve.widths = {4};
    c.loss_curve.n_train = {500};
    c.loss_curve.n_rep = 2;
    c.witness.n_test = 200;
    c.witness.grid_points = 61;
    c.manifold.k_max = {0, 1, 2};
    c.manifold.n_eval = 500;
    return c;
  }
  std::string list;
  for (const auto& p : profile_names()) list += (list.empty() ? "" : ", ") + p;
  raise(C2ST_ERR_SCHEMA, "key 'profile' expects one of {" + list + "}, got \"" + name + "\"");
}

json to_json(const RunConfig& c) {
  return json{
      {"profile", c.profile},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"methods", c.methods},
      {"data",
       {{"source", c.data.source},
        {"family", c.data.family},
        {"delta", c.data.delta},
        {"images", c.data.images},
        {"labels", c.data.labels},
        {"p_classes", c.data.p_classes},
        {"q_classes", c.data.q_classes}}},
      {"harness",
       {{"n_all", c.harness.n_all},
        {"n_run", c.harness.n_run},
        {"n_rep", c.harness.n_rep},
        {"m_perm", c.harness.m_perm},
        {"alpha", c.harness.alpha},
        {"retrain_per_run", c.harness.retrain_per_run},
        {"bandwidth_grid", c.harness.bandwidth_grid}}},
      {"training",
       {{"hidden_widths", c.training.hidden_widths},
        {"epochs", c.training.epochs},
        {"batch_size", c.training.batch_size},
        {"learning_rate", c.training.learning_rate},
        {"init", c.training.init},
        {"weight_clip", c.training.weight_clip}}},
      {"gen", {{"n", c.gen.n}}},
      {"train", {{"x", c.train.x}, {"y", c.train.y}}},
      {"test",
       {{"method", c.test.method},
        {"scores", c.test.scores},
        {"x", c.test.x},
        {"y", c.test.y},
        {"model", c.test.model},
        {"sigma", c.test.sigma}}},
      {"loss_curve",
       {{"example", c.loss_curve.example},
        {"delta", c.loss_curve.delta},
        {"widths", c.loss_curve.widths},
        {"n_train", c.loss_curve.n_train},
        {"n_rep", c.loss_curve.n_rep}}},
      {"witness",
       {{"grid_lo", c.witness.grid_lo},
        {"grid_hi", c.witness.grid_hi},
        {"grid_points", c.witness.grid_points},
        {"sigma", c.witness.sigma},
        {"n_test", c.witness.n_test},
        {"model", c.witness.model}}},
      {"manifold",
       {{"manifold", c.manifold.manifold},
        {"target", c.manifold.target},
        {"delta", c.manifold.delta},
        {"k_max", c.manifold.k_max},
        {"ridge", c.manifold.ridge},
        {"grid_points", c.manifold.grid_points},
        {"n_eval", c.manifold.n_eval},
        {"save", c.manifold.save}}},
  };
}

void validate_schema(const json& doc) {
  if (!doc.is_object()) raise(C2ST_ERR_SCHEMA, "config must be a JSON object");
  walk(doc, "");
}

RunConfig config_from_json(const json& doc) {
  validate_schema(doc);
  const std::string profile = doc.contains("profile") ? doc["profile"].get<std::string>() : "default";
  json m = to_json(profile_config(profile));
  m.merge_patch(doc);
  validate_schema(m);
  RunConfig c;
  c.profile = m["profile"];
  c.output_dir = m["output_dir"];
  c.seed = m["seed"];
  c.methods = m["methods"].get<std::vector<std::string>>();
  const json& d = m["data"];
  c.data = {d["source"], d["family"], d["delta"], d["images"], d["labels"],
            d["p_classes"].get<std::vector<int>>(), d["q_classes"].get<std::vector<int>>()};
  const json& h = m["harness"];
  c.harness = {h["n_all"], h["n_run"], h["n_rep"], h["m_perm"], h["alpha"], h["retrain_per_run"],
               h["bandwidth_grid"].get<std::vector<double>>()};
  const json& t = m["training"];
  c.training = {t["hidden_widths"].get<std::vector<std::uint64_t>>(), t["epochs"], t["batch_size"],
                t["learning_rate"], t["init"], t["weight_clip"]};
  c.gen = {m["gen"]["n"]};
  c.train = {m["train"]["x"], m["train"]["y"]};
  const json& s = m["test"];
  c.test = {s["method"], s["scores"], s["x"], s["y"], s["model"], s["sigma"]};
  const json& l = m["loss_curve"];
  c.loss_curve = {l["example"], l["delta"], l["widths"].get<std::vector<std::uint64_t>>(),
                  l["n_train"].get<std::vector<std::uint64_t>>(), l["n_rep"]};
  const json& w = m["witness"];
  c.witness = {w["grid_lo"], w["grid_hi"], w["grid_points"], w["sigma"], w["n_test"], w["model"]};
  const json& g = m["manifold"];
  c.manifold = {g["manifold"], g["target"], g["delta"], g["k_max"].get<std::vector<std::int64_t>>(),
                g["ridge"], g["grid_points"], g["n_eval"], g["save"]};
  check_ranges(c);
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    raise(C2ST_ERR_SCHEMA, "override '" + assignment + "' must have the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  const Kind kind = kind_of(key);
  const bool strings = kind == Kind::kString || kind == Kind::kStringList;
  json value = parse_scalar(text, kind == Kind::kString);
  if (is_list(kind) && !value.is_array()) {
    value = json::array();
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) value.push_back(parse_scalar(item, strings));
    }
  }
  if (!matches(kind, value)) {
    raise(C2ST_ERR_SCHEMA, "key '" + key + "' expects " + expected_form(kind) + ", got " + value.dump());
  }
  json* node = &doc;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

RunConfig load_config(const ConfigSources& sources) {
  json doc = json::object();
  if (!sources.path.empty()) {
    std::ifstream in(sources.path);
    if (!in) raise(C2ST_ERR_IO, "cannot open config '" + sources.path + "'");
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) raise(C2ST_ERR_SCHEMA, "config '" + sources.path + "' is not valid JSON");
    validate_schema(doc);
  }
  if (!sources.profile.empty()) doc["profile"] = sources.profile;
  for (const auto& o : sources.overrides) apply_override(doc, o);
  return config_from_json(doc);
}

RunConfig parse_config(const std::string& path) { return load_config({path, "", {}}); }

std::string emit_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace c2st::cli
