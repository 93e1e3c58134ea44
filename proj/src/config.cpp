#include "pacloud/config.hpp"

#include <cmath>
#include <functional>
#include <map>

#include <json.hpp>

#include "pacloud/errors.hpp"
#include "pacloud/io.hpp"

namespace pacloud {
namespace {

using nlohmann::json;
using Handler = std::function<void(const json &, const std::string &)>;

void walk(const json &j, const std::string &prefix, const std::map<std::string, Handler> &handlers) {
  if (!j.is_object())
    throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto &[k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    const auto it = handlers.find(k);
    if (it == handlers.end())
      throw ConfigError(key, "unknown key");
    it->second(v, key);
  }
}

double num(const json &v, const std::string &key) {
  if (!v.is_number())
    throw ConfigError(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d))
    throw ConfigError(key, "expected a finite number");
  return d;
}

std::size_t count(const json &v, const std::string &key) {
  if (!v.is_number_unsigned())
    throw ConfigError(key, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::string str(const json &v, const std::string &key) {
  if (!v.is_string())
    throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

bool boolean(const json &v, const std::string &key) {
  if (!v.is_boolean())
    throw ConfigError(key, "expected true or false");
  return v.get<bool>();
}

template <std::size_t N> std::array<double, N> nums(const json &v, const std::string &key) {
  if (!v.is_array() || v.size() != N)
    throw ConfigError(key, "expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i)
    out[i] = num(v[i], key + "[" + std::to_string(i) + "]");
  return out;
}

Vec3 vec3(const json &v, const std::string &key) {
  const auto a = nums<3>(v, key);
  return {a[0], a[1], a[2]};
}

Stage stage(const json &v, const std::string &key) {
  const std::string s = str(v, key);
  if (s == "coarse")
    return Stage::coarse;
  if (s == "fine")
    return Stage::fine;
  throw ConfigError(key, "expected \"coarse\" or \"fine\"");
}

const char *name(Stage s) { return s == Stage::coarse ? "coarse" : "fine"; }

const char *name(ArrayKind k) {
  switch (k) {
  case ArrayKind::sphere:
    return "sphere";
  case ArrayKind::hemisphere:
    return "hemisphere";
  case ArrayKind::envelope_random:
    return "envelope_random";
  }
  return "";
}

json to_json(const Vec3 &v) { return json::array({v.x, v.y, v.z}); }

Box box(const json &v, const std::string &key) {
  Box b;
  walk(v, key, {{"lo", [&](const json &x, const std::string &k) { b.lo = vec3(x, k); }},
                {"hi", [&](const json &x, const std::string &k) { b.hi = vec3(x, k); }}});
  return b;
}

void check(bool ok, const std::string &key, const std::string &what) {
  if (!ok)
    throw ConfigError(key, what);
}

void check_box(const Box &b, const std::string &key) {
  for (int k = 0; k < 3; ++k)
    check(b.hi[k] > b.lo[k], key, "hi must exceed lo on every axis");
}

} // namespace

Schedule ScheduleConfig::resolve() const {
  Schedule s;
  if (!preset.empty())
    s = Schedule::preset(preset, preset_iters);
  else
    s.levels = levels;
  s.duplication_period = duplication_period;
  s.coarse_period = coarse_period;
  return s;
}

TimeGrid ReconConfig::time_grid() const {
  if (acquisition.preset == "standard-40mhz")
    return {physics.t0, standard_acquisition().grid.dt, standard_acquisition().grid.n_samples};
  if (acquisition.preset == "desk-20mhz")
    return {physics.t0, desk_acquisition().grid.dt, desk_acquisition().grid.n_samples};
  return {physics.t0, acquisition.dt, acquisition.n_samples};
}

void ReconConfig::validate() const {
  check(physics.sound_speed > 0, "physics.sound_speed", "must be positive");
  check(physics.cutoff_sigma >= 4, "physics.cutoff_sigma", "must be at least 4");
  check(acquisition.preset.empty() || acquisition.preset == "standard-40mhz" || acquisition.preset == "desk-20mhz",
        "acquisition.preset", "unknown preset \"" + acquisition.preset + "\"");
  check(acquisition.dt > 0, "acquisition.dt", "must be positive");
  check(acquisition.n_samples >= 2, "acquisition.n_samples", "must be at least 2");
  check(acquisition.noise_sigma >= 0, "acquisition.noise_sigma", "must be non-negative");
  check(array.count >= 4, "array.count", "must be at least 4");
  check(array.radius > 0, "array.radius", "must be positive");

  check(phantom.p0_range[0] > 0 && phantom.p0_range[1] >= phantom.p0_range[0], "phantom.p0_range",
        "must be positive and ordered");
  check(phantom.a0_range[0] > 0 && phantom.a0_range[1] >= phantom.a0_range[0], "phantom.a0_range",
        "must be positive and ordered");
  check(phantom.min_separation >= 0, "phantom.min_separation", "must be non-negative");
  check(phantom.tube_spacing > 0, "phantom.tube_spacing", "must be positive");
  check_box(phantom.box, "phantom.box");
  for (std::size_t i = 0; i < phantom.balls.size(); ++i)
    check(phantom.balls[i].a0 > 0, "phantom.balls[" + std::to_string(i) + "]", "a0 must be positive");

  check(initialization.n_points >= 1, "initialization.n_points", "must be at least 1");
  check(initialization.a0_init > 0, "initialization.a0_init", "must be positive");
  check(!initialization.inward_offset || *initialization.inward_offset >= 0, "initialization.inward_offset",
        "must be non-negative");
  if (initialization.box)
    check_box(*initialization.box, "initialization.box");

  check(filter.factor >= 1, "filter.factor", "must be at least 1");

  try {
    schedule.resolve().validate();
  } catch (const ArgumentError &e) {
    throw ConfigError(schedule.preset.empty() ? "schedule.levels" : "schedule.preset", e.what());
  }
  check(schedule.duplication_period >= 1, "schedule.duplication_period", "must be at least 1");
  check(schedule.coarse_period >= 1, "schedule.coarse_period", "must be at least 1");

  try {
    thresholds.validate();
  } catch (const ArgumentError &e) {
    throw ConfigError("thresholds", e.what());
  }

  const auto &lr = optimizer.lr;
  check(lr.p0 > 0, "optimizer.lr_p0", "must be positive");
  check(lr.a0 > 0, "optimizer.lr_a0", "must be positive");
  check(lr.position > 0, "optimizer.lr_position", "must be positive");
  check(lr.a0_free > 0, "optimizer.lr_a0_free", "must be positive");
  check(optimizer.adam.beta1 >= 0 && optimizer.adam.beta1 < 1, "optimizer.beta1", "must be in [0, 1)");
  check(optimizer.adam.beta2 >= 0 && optimizer.adam.beta2 < 1, "optimizer.beta2", "must be in [0, 1)");
  check(optimizer.adam.eps > 0, "optimizer.eps", "must be positive");
  check(optimizer.a0_floor > 0, "optimizer.a0_floor", "must be positive");
  check(optimizer.converge_tol >= 0, "optimizer.converge_tol", "must be non-negative");

  try {
    render.validate();
  } catch (const ArgumentError &e) {
    throw ConfigError("render", e.what());
  }
}

ReconConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigError("<root>", std::string("malformed JSON at byte ") + std::to_string(e.byte) + ": " + e.what());
  }
  ReconConfig c;
  auto &p = c.paths;
  auto &ph = c.physics;
  auto &aq = c.acquisition;
  auto &ar = c.array;
  auto &pt = c.phantom;
  auto &in = c.initialization;
  auto &fl = c.filter;
  auto &sc = c.schedule;
  auto &th = c.thresholds;
  auto &op = c.optimizer;

  const auto set_str = [](std::string &dst) {
    return [&dst](const json &v, const std::string &k) { dst = str(v, k); };
  };
  const auto set_num = [](double &dst) { return [&dst](const json &v, const std::string &k) { dst = num(v, k); }; };
  const auto set_count = [](std::size_t &dst) {
    return [&dst](const json &v, const std::string &k) { dst = count(v, k); };
  };

  walk(root, "",
       {
           {"seed", [&](const json &v, const std::string &k) {
              if (!v.is_number_unsigned())
                throw ConfigError(k, "expected a non-negative integer");
              c.seed = v.get<std::uint64_t>();
            }},
           {"paths", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"sensors", set_str(p.sensors)}, {"signals", set_str(p.signals)},
                    {"output_dir", set_str(p.output_dir)}, {"cloud", set_str(p.cloud)},
                    {"volume", set_str(p.volume)}, {"reference", set_str(p.reference)},
                    {"roi_mask", set_str(p.roi_mask)}, {"bg_mask", set_str(p.bg_mask)}});
            }},
           {"physics", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"sound_speed", set_num(ph.sound_speed)}, {"t0", set_num(ph.t0)},
                    {"cutoff_sigma", set_num(ph.cutoff_sigma)}});
            }},
           {"acquisition", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"preset", set_str(aq.preset)}, {"dt", set_num(aq.dt)},
                    {"n_samples", set_count(aq.n_samples)}, {"noise_sigma", set_num(aq.noise_sigma)}});
            }},
           {"array", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"kind",
                     [&](const json &x, const std::string &kk) {
                       const std::string s = str(x, kk);
                       if (s == "sphere")
                         ar.kind = ArrayKind::sphere;
                       else if (s == "hemisphere")
                         ar.kind = ArrayKind::hemisphere;
                       else if (s == "envelope_random")
                         ar.kind = ArrayKind::envelope_random;
                       else
                         throw ConfigError(kk, "expected sphere, hemisphere or envelope_random");
                     }},
                    {"count", set_count(ar.count)},
                    {"radius", set_num(ar.radius)},
                    {"center", [&](const json &x, const std::string &kk) { ar.center = vec3(x, kk); }}});
            }},
           {"phantom", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"kind",
                     [&](const json &x, const std::string &kk) {
                       const std::string s = str(x, kk);
                       if (s == "balls")
                         pt.kind = PhantomKind::balls;
                       else if (s == "tube_tree")
                         pt.kind = PhantomKind::tube_tree;
                       else
                         throw ConfigError(kk, "expected balls or tube_tree");
                     }},
                    {"count", set_count(pt.count)},
                    {"branches", set_count(pt.branches)},
                    {"segments", set_count(pt.segments)},
                    {"side_branches", set_count(pt.side_branches)},
                    {"tube_spacing", set_num(pt.tube_spacing)},
                    {"box", [&](const json &x, const std::string &kk) { pt.box = box(x, kk); }},
                    {"p0_range", [&](const json &x, const std::string &kk) { pt.p0_range = nums<2>(x, kk); }},
                    {"a0_range", [&](const json &x, const std::string &kk) { pt.a0_range = nums<2>(x, kk); }},
                    {"min_separation", set_num(pt.min_separation)},
                    {"balls", [&](const json &x, const std::string &kk) {
                       if (!x.is_array())
                         throw ConfigError(kk, "expected an array of [x, y, z, p0, a0]");
                       pt.balls.clear();
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         const auto b = nums<5>(x[i], kk + "[" + std::to_string(i) + "]");
                         SourceBall s;
                         s.position = Vec3f(Vec3(b[0], b[1], b[2]));
                         s.p0 = static_cast<float>(b[3]);
                         s.a0 = static_cast<float>(b[4]);
                         pt.balls.push_back(s);
                       }
                     }}});
            }},
           {"initialization", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"n_points", set_count(in.n_points)},
                    {"p0_init", set_num(in.p0_init)},
                    {"a0_init", set_num(in.a0_init)},
                    {"inward_offset",
                     [&](const json &x, const std::string &kk) {
                       if (x.is_null())
                         in.inward_offset.reset();
                       else
                         in.inward_offset = num(x, kk);
                     }},
                    {"box", [&](const json &x, const std::string &kk) {
                       if (x.is_null())
                         in.box.reset();
                       else
                         in.box = box(x, kk);
                     }}});
            }},
           {"filter", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"enabled", [&](const json &x, const std::string &kk) { fl.enabled = boolean(x, kk); }},
                    {"factor", set_count(fl.factor)},
                    {"predicate", [&](const json &x, const std::string &kk) {
                       const std::string s = str(x, kk);
                       if (s == "strict")
                         fl.predicate = FilterPredicate::strict;
                       else if (s == "lax")
                         fl.predicate = FilterPredicate::lax;
                       else
                         throw ConfigError(kk, "expected strict or lax");
                     }}});
            }},
           {"schedule", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"preset", set_str(sc.preset)},
                    {"preset_iters",
                     [&](const json &x, const std::string &kk) {
                       const auto a = nums<3>(x, kk);
                       for (int i = 0; i < 3; ++i) {
                         if (!(a[i] >= 0) || a[i] != std::floor(a[i]))
                           throw ConfigError(kk, "expected non-negative integers");
                         sc.preset_iters[i] = static_cast<std::size_t>(a[i]);
                       }
                     }},
                    {"levels",
                     [&](const json &x, const std::string &kk) {
                       if (!x.is_array())
                         throw ConfigError(kk, "expected an array of levels");
                       sc.levels.clear();
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         Level l;
                         walk(x[i], kk + "[" + std::to_string(i) + "]",
                              {{"factor", set_count(l.factor)},
                               {"iters", set_count(l.max_iters)},
                               {"stage", [&](const json &y, const std::string &ky) { l.stage = stage(y, ky); }}});
                         sc.levels.push_back(l);
                       }
                     }},
                    {"duplication_period", set_count(sc.duplication_period)},
                    {"coarse_period", set_count(sc.coarse_period)}});
            }},
           {"thresholds", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"destroy_p0_frac", set_num(th.destroy_p0_frac)},
                    {"split_a0", set_num(th.split_a0)},
                    {"duplicate_grad_quantile", set_num(th.duplicate_grad_quantile)},
                    {"a0_min", set_num(th.a0_min)},
                    {"a0_max", set_num(th.a0_max)}});
            }},
           {"optimizer", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"lr_p0", set_num(op.lr.p0)},
                    {"lr_a0", set_num(op.lr.a0)},
                    {"lr_position", set_num(op.lr.position)},
                    {"lr_a0_free", set_num(op.lr.a0_free)},
                    {"beta1", set_num(op.adam.beta1)},
                    {"beta2", set_num(op.adam.beta2)},
                    {"eps", set_num(op.adam.eps)},
                    {"a0_floor", set_num(op.a0_floor)},
                    {"converge_tol", set_num(op.converge_tol)},
                    {"converge_window", set_count(op.converge_window)}});
            }},
           {"refine", [&](const json &v, const std::string &k) {
              walk(v, k, {{"iters", set_count(c.refine.iters)}});
            }},
           {"render", [&](const json &v, const std::string &k) {
              walk(v, k,
                   {{"dims",
                     [&](const json &x, const std::string &kk) {
                       if (!x.is_array() || x.size() != 3)
                         throw ConfigError(kk, "expected three positive integers");
                       for (std::size_t i = 0; i < 3; ++i)
                         c.render.dims[i] = count(x[i], kk + "[" + std::to_string(i) + "]");
                     }},
                    {"spacing", set_num(c.render.spacing)},
                    {"origin", [&](const json &x, const std::string &kk) { c.render.origin = vec3(x, kk); }},
                    {"support_sigma", set_num(c.render.support_sigma)}});
            }},
           {"deterministic_reduction",
            [&](const json &v, const std::string &k) { c.deterministic_reduction = boolean(v, k); }},
       });
  c.validate();
  return c;
}

ReconConfig load_config(const std::string &path) { return parse_config(read_file(path)); }

std::string dump_config(const ReconConfig &c) {
  json j;
  j["seed"] = c.seed;
  j["paths"] = {{"sensors", c.paths.sensors},     {"signals", c.paths.signals},
                {"output_dir", c.paths.output_dir}, {"cloud", c.paths.cloud},
                {"volume", c.paths.volume},         {"reference", c.paths.reference},
                {"roi_mask", c.paths.roi_mask},     {"bg_mask", c.paths.bg_mask}};
  j["physics"] = {{"sound_speed", c.physics.sound_speed},
                  {"t0", c.physics.t0},
                  {"cutoff_sigma", c.physics.cutoff_sigma}};
  j["acquisition"] = {{"preset", c.acquisition.preset},
                      {"dt", c.acquisition.dt},
                      {"n_samples", c.acquisition.n_samples},
                      {"noise_sigma", c.acquisition.noise_sigma}};
  j["array"] = {{"kind", name(c.array.kind)},
                {"count", c.array.count},
                {"radius", c.array.radius},
                {"center", to_json(c.array.center)}};
  json balls = json::array();
  for (const auto &b : c.phantom.balls)
    balls.push_back({b.position.x, b.position.y, b.position.z, b.p0, b.a0});
  j["phantom"] = {{"kind", c.phantom.kind == PhantomKind::balls ? "balls" : "tube_tree"},
                  {"count", c.phantom.count},
                  {"branches", c.phantom.branches},
                  {"segments", c.phantom.segments},
                  {"side_branches", c.phantom.side_branches},
                  {"tube_spacing", c.phantom.tube_spacing},
                  {"box", {{"lo", to_json(c.phantom.box.lo)}, {"hi", to_json(c.phantom.box.hi)}}},
                  {"p0_range", c.phantom.p0_range},
                  {"a0_range", c.phantom.a0_range},
                  {"min_separation", c.phantom.min_separation},
                  {"balls", balls}};
  const auto &in = c.initialization;
  j["initialization"] = {{"n_points", in.n_points},
                         {"p0_init", in.p0_init},
                         {"a0_init", in.a0_init},
                         {"inward_offset", in.inward_offset ? json(*in.inward_offset) : json(nullptr)},
                         {"box", in.box ? json{{"lo", to_json(in.box->lo)}, {"hi", to_json(in.box->hi)}}
                                        : json(nullptr)}};
  j["filter"] = {{"enabled", c.filter.enabled},
                 {"factor", c.filter.factor},
                 {"predicate", c.filter.predicate == FilterPredicate::strict ? "strict" : "lax"}};
  json levels = json::array();
  for (const auto &l : c.schedule.levels)
    levels.push_back({{"factor", l.factor}, {"iters", l.max_iters}, {"stage", name(l.stage)}});
  j["schedule"] = {{"preset", c.schedule.preset},
                   {"preset_iters", c.schedule.preset_iters},
                   {"levels", levels},
                   {"duplication_period", c.schedule.duplication_period},
                   {"coarse_period", c.schedule.coarse_period}};
  j["thresholds"] = {{"destroy_p0_frac", c.thresholds.destroy_p0_frac},
                     {"split_a0", c.thresholds.split_a0},
                     {"duplicate_grad_quantile", c.thresholds.duplicate_grad_quantile},
                     {"a0_min", c.thresholds.a0_min},
                     {"a0_max", c.thresholds.a0_max}};
  const auto &op = c.optimizer;
  j["optimizer"] = {{"lr_p0", op.lr.p0},          {"lr_a0", op.lr.a0},         {"lr_position", op.lr.position},
                    {"lr_a0_free", op.lr.a0_free}, {"beta1", op.adam.beta1},    {"beta2", op.adam.beta2},
                    {"eps", op.adam.eps},          {"a0_floor", op.a0_floor},   {"converge_tol", op.converge_tol},
                    {"converge_window", op.converge_window}};
  j["refine"] = {{"iters", c.refine.iters}};
  j["render"] = {{"dims", c.render.dims},
                 {"spacing", c.render.spacing},
                 {"origin", to_json(c.render.origin)},
                 {"support_sigma", c.render.support_sigma}};
  j["deterministic_reduction"] = c.deterministic_reduction;
  return j.dump(2) + "\n";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

} // namespace pacloud
