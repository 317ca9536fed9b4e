#include "mfbsde/config.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "mfbsde/scenarios.hpp"

namespace mfbsde {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    require_object(j, where);
    for (const auto& item : j.items())
        if (!allowed.count(item.key())) throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
}

template <typename T>
T get(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: key '" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

std::size_t get_count(const json& j, const char* key, std::size_t fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("config: key '" + std::string(key) + "' in " + where + " must be a nonnegative integer");
    return v.get<std::size_t>();
}

template <typename E, std::size_t K>
E parse_enum(const std::string& text, const std::array<std::pair<const char*, E>, K>& table, const std::string& what) {
    for (const auto& [name, value] : table)
        if (text == name) return value;
    throw ConfigError("config: unknown " + what + " '" + text + "'");
}

template <typename E, std::size_t K>
std::string enum_name(E value, const std::array<std::pair<const char*, E>, K>& table) {
    for (const auto& [name, v] : table)
        if (v == value) return name;
    return "unknown";
}

constexpr std::array<std::pair<const char*, LossKind>, 2> kLossKinds{
    {{"linear_shift", LossKind::linear_shift}, {"sine_perturbed", LossKind::sine_perturbed}}};
constexpr std::array<std::pair<const char*, DriverKind>, 2> kDriverKinds{
    {{"affine", DriverKind::affine}, {"quadratic_capped", DriverKind::quadratic_capped}}};
constexpr std::array<std::pair<const char*, ResistanceKind>, 4> kResistanceKinds{
    {{"zero", ResistanceKind::zero},
     {"evaluation", ResistanceKind::evaluation},
     {"running_sup", ResistanceKind::running_sup},
     {"scaled_integral", ResistanceKind::scaled_integral}}};
constexpr std::array<std::pair<const char*, TerminalKind>, 2> kTerminalKinds{
    {{"affine", TerminalKind::affine}, {"tanh", TerminalKind::tanh}}};
constexpr std::array<std::pair<const char*, SlotPolicy>, 3> kSlots{{{"implicit_y", SlotPolicy::implicit_y},
                                                                   {"fully_frozen", SlotPolicy::fully_frozen},
                                                                   {"frozen_y", SlotPolicy::frozen_y}}};

}  // namespace

std::string to_string(SlotPolicy policy) { return enum_name(policy, kSlots); }
SlotPolicy parse_slots(const std::string& text) { return parse_enum(text, kSlots, "slot policy"); }

json scenario_to_json(const ScenarioSpec& s) {
    json j;
    j["name"] = s.name;
    j["T"] = s.T;
    j["d"] = s.d;
    j["bounded_at_zero_z"] = s.bounded_at_zero_z;
    j["terminal"] = {{"kind", enum_name(s.terminal.kind, kTerminalKinds)},
                     {"scale", s.terminal.scale},
                     {"shift", s.terminal.shift}};
    const DriverSpec& f = s.driver;
    j["driver"] = {{"kind", enum_name(f.kind, kDriverKinds)},
                   {"mode", to_string(f.mode)},
                   {"lambda", f.lambda},
                   {"alpha", f.alpha},
                   {"l_bound", f.l_bound},
                   {"constant", f.constant},
                   {"a_y", f.a_y},
                   {"a_ybar", f.a_ybar},
                   {"a_k", f.a_k},
                   {"b_z", f.b_z},
                   {"b_zbar", f.b_zbar},
                   {"gamma", f.gamma},
                   {"z_cap", f.z_cap},
                   {"eta", f.eta}};
    j["resistance"] = {{"kind", enum_name(s.resistance.kind, kResistanceKinds)}, {"horizon", s.resistance.horizon}};
    j["loss"] = {{"kind", enum_name(s.loss.kind, kLossKinds)},
                 {"level", s.loss.level},
                 {"amplitude", s.loss.amplitude},
                 {"period", s.loss.period},
                 {"beta", s.loss.beta}};
    return j;
}

ScenarioSpec scenario_from_json(const json& j) {
    check_keys(j, {"name", "T", "d", "bounded_at_zero_z", "terminal", "driver", "resistance", "loss"}, "scenario");
    ScenarioSpec s;
    s.name = get<std::string>(j, "name", "inline", "scenario");
    s.T = get<double>(j, "T", 1.0, "scenario");
    s.d = get<int>(j, "d", 1, "scenario");
    s.bounded_at_zero_z = get<bool>(j, "bounded_at_zero_z", false, "scenario");

    if (j.contains("terminal")) {
        const json& t = j.at("terminal");
        check_keys(t, {"kind", "scale", "shift"}, "scenario.terminal");
        s.terminal.kind = parse_enum(get<std::string>(t, "kind", "affine", "scenario.terminal"), kTerminalKinds,
                                     "terminal kind");
        s.terminal.scale = get<double>(t, "scale", 1.0, "scenario.terminal");
        s.terminal.shift = get<double>(t, "shift", 0.0, "scenario.terminal");
    }
    if (j.contains("driver")) {
        const json& d = j.at("driver");
        const std::string w = "scenario.driver";
        check_keys(d,
                   {"kind", "mode", "lambda", "alpha", "l_bound", "constant", "a_y", "a_ybar", "a_k", "b_z", "b_zbar",
                    "gamma", "z_cap", "eta"},
                   w);
        DriverSpec& f = s.driver;
        f.kind = parse_enum(get<std::string>(d, "kind", "affine", w), kDriverKinds, "driver kind");
        try {
            f.mode = parse_mode(get<std::string>(d, "mode", "lipschitz", w));
        } catch (const ModelError& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        f.lambda = get<double>(d, "lambda", 1.0, w);
        f.alpha = get<double>(d, "alpha", 0.0, w);
        f.l_bound = get<double>(d, "l_bound", 0.0, w);
        f.constant = get<double>(d, "constant", 0.0, w);
        f.a_y = get<double>(d, "a_y", 0.0, w);
        f.a_ybar = get<double>(d, "a_ybar", 0.0, w);
        f.a_k = get<double>(d, "a_k", 0.0, w);
        f.b_z = get<std::vector<double>>(d, "b_z", {}, w);
        f.b_zbar = get<std::vector<double>>(d, "b_zbar", {}, w);
        f.gamma = get<double>(d, "gamma", 0.0, w);
        f.z_cap = get<double>(d, "z_cap", 1e3, w);
        f.eta = get<double>(d, "eta", 0.0, w);
    }
    if (j.contains("resistance")) {
        const json& r = j.at("resistance");
        check_keys(r, {"kind", "horizon"}, "scenario.resistance");
        s.resistance.kind = parse_enum(get<std::string>(r, "kind", "zero", "scenario.resistance"), kResistanceKinds,
                                       "resistance kind");
        s.resistance.horizon = get<double>(r, "horizon", s.T, "scenario.resistance");
    }
    if (j.contains("loss")) {
        const json& l = j.at("loss");
        const std::string w = "scenario.loss";
        check_keys(l, {"kind", "level", "amplitude", "period", "beta"}, w);
        const LossKind kind = parse_enum(get<std::string>(l, "kind", "linear_shift", w), kLossKinds, "loss kind");
        const double level = get<double>(l, "level", 0.0, w);
        const double amplitude = get<double>(l, "amplitude", 0.0, w);
        const double period = get<double>(l, "period", s.T, w);
        try {
            s.loss = kind == LossKind::linear_shift
                         ? LossSpec::linear_shift(level, amplitude, period)
                         : LossSpec::sine_perturbed(get<double>(l, "beta", 0.5, w), level, amplitude, period);
        } catch (const ModelError& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    return s;
}

RunConfig parse_config(const json& j) {
    check_keys(j,
               {"scenario", "grid", "ensemble", "backend", "mode", "picard", "stitch", "tolerances", "workers", "debug",
                "output"},
               "config");
    if (!j.contains("scenario")) throw ConfigError("config: missing 'scenario'");
    RunConfig c;
    const json& sj = j.at("scenario");
    if (sj.is_string()) {
        c.scenario_name = sj.get<std::string>();
        try {
            c.scenario = find_scenario(c.scenario_name).spec;
        } catch (const ModelError& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    } else {
        c.scenario = scenario_from_json(sj);
        c.scenario_name = c.scenario.name;
    }

    if (j.contains("grid")) {
        const json& g = j.at("grid");
        check_keys(g, {"T", "n"}, "grid");
        c.scenario.T = get<double>(g, "T", c.scenario.T, "grid");
        c.n = get_count(g, "n", c.n, "grid");
    }
    if (j.contains("ensemble")) {
        const json& e = j.at("ensemble");
        check_keys(e, {"N", "d", "seed", "antithetic"}, "ensemble");
        c.N = get_count(e, "N", c.N, "ensemble");
        c.scenario.d = get<int>(e, "d", c.scenario.d, "ensemble");
        c.seed = get<std::uint64_t>(e, "seed", c.seed, "ensemble");
        c.antithetic = get<bool>(e, "antithetic", c.antithetic, "ensemble");
    }
    if (j.contains("backend")) {
        const json& b = j.at("backend");
        if (b.is_string()) {
            c.backend = b.get<std::string>();
        } else {
            check_keys(b, {"kind", "degree"}, "backend");
            c.backend = get<std::string>(b, "kind", c.backend, "backend");
            c.degree = get<int>(b, "degree", c.degree, "backend");
        }
    }
    if (j.contains("mode")) {
        try {
            c.scenario.driver.mode = parse_mode(get<std::string>(j, "mode", "", "config"));
        } catch (const ModelError& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    if (j.contains("picard")) {
        const json& p = j.at("picard");
        check_keys(p, {"tol", "max_iter", "slots", "a_tilde", "loss_tol"}, "picard");
        if (p.contains("tol")) c.picard_tol = get<double>(p, "tol", 0.0, "picard");
        c.max_iter = get<int>(p, "max_iter", c.max_iter, "picard");
        if (p.contains("slots")) c.slots = parse_slots(get<std::string>(p, "slots", "", "picard"));
        c.a_tilde = get<double>(p, "a_tilde", c.a_tilde, "picard");
        c.loss_tol = get<double>(p, "loss_tol", c.loss_tol, "picard");
    }
    if (j.contains("stitch")) {
        const json& s = j.at("stitch");
        check_keys(s, {"enabled", "intervals"}, "stitch");
        c.stitch = get<bool>(s, "enabled", c.stitch, "stitch");
        c.intervals = get_count(s, "intervals", c.intervals, "stitch");
    }
    if (j.contains("tolerances")) {
        const json& t = j.at("tolerances");
        check_keys(t, {"constraint", "flatness"}, "tolerances");
        if (t.contains("constraint")) c.eps_constraint = get<double>(t, "constraint", 0.0, "tolerances");
        if (t.contains("flatness")) c.eps_flat = get<double>(t, "flatness", 0.0, "tolerances");
    }
    c.workers = get<unsigned>(j, "workers", c.workers, "config");
    if (j.contains("debug")) {
        const json& d = j.at("debug");
        check_keys(d, {"inflate_k"}, "debug");
        c.inflate_k = get<double>(d, "inflate_k", 0.0, "debug");
    }
    c.output = get<std::string>(j, "output", "", "config");

    if (c.backend != "regression" && c.backend != "lattice")
        throw ConfigError("config: backend must be 'regression' or 'lattice', got '" + c.backend + "'");
    if (c.n < 1) throw ConfigError("config: grid.n must be at least 1");
    if (c.backend == "regression") {
        if (c.N < 2) throw ConfigError("config: ensemble.N must be at least 2");
        if (c.antithetic && (c.N % 2 != 0)) throw ConfigError("config: an antithetic ensemble needs an even N");
        if (c.degree < 0) throw ConfigError("config: backend.degree must be nonnegative");
    }
    if (c.backend == "lattice" && c.scenario.d != 1) throw ConfigError("config: the lattice backend needs d = 1");
    if (c.workers < 1) throw ConfigError("config: workers must be at least 1");
    if (!(c.loss_tol > 0.0)) throw ConfigError("config: picard.loss_tol must be positive");
    if (c.max_iter < 1) throw ConfigError("config: picard.max_iter must be at least 1");
    try {
        c.scenario.check();
    } catch (const ModelError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json RunConfig::resolved() const {
    json j;
    j["scenario"] = scenario_to_json(scenario);
    j["scenario_name"] = scenario_name;
    j["grid"] = {{"T", scenario.T}, {"n", n}};
    j["ensemble"] = {{"N", N}, {"d", scenario.d}, {"seed", seed}, {"antithetic", antithetic}};
    j["backend"] = {{"kind", backend}, {"degree", degree}};
    j["mode"] = to_string(scenario.mode());
    j["picard"] = {{"tol", picard_tol ? json(*picard_tol) : json(nullptr)},
                   {"max_iter", max_iter},
                   {"slots", slots ? json(to_string(*slots)) : json(nullptr)},
                   {"a_tilde", a_tilde},
                   {"loss_tol", loss_tol}};
    j["stitch"] = {{"enabled", stitch}, {"intervals", intervals}};
    j["tolerances"] = {{"constraint", eps_constraint ? json(*eps_constraint) : json(nullptr)},
                       {"flatness", eps_flat ? json(*eps_flat) : json(nullptr)}};
    j["debug"] = {{"inflate_k", inflate_k}};
    // workers and output location do not influence results and are left out
    return j;
}

std::string git_blob_sha1(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &length) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("config: SHA-1 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string scenario_hash(const ScenarioSpec& scenario) { return git_blob_sha1(scenario_to_json(scenario).dump()); }

json constants_to_json(const ConstantsReport& r) {
    json j;
    j["inputs"] = {{"C", r.C}, {"L", r.L}, {"lambda", r.lambda}, {"alpha", r.alpha}, {"T", r.T}, {"A_tilde", r.a_tilde}};
    j["delta_lip"] = r.delta_lip;
    j["a_tilde_0"] = r.a_tilde_0;
    j["delta_q"] = r.delta_q;
    j["a_hat"] = r.a_hat;
    j["delta_hat"] = r.delta_hat;
    j["delta_hat_literal"] = r.delta_hat_literal;
    j["delta_hat_third_term"] = {{"reciprocal", r.delta_hat_third_reciprocal}, {"literal", r.delta_hat_third_literal}};
    j["l_bar_1"] = r.l_bar_1;
    j["l_bar_2"] = r.l_bar_2;
    j["l_bar"] = r.l_bar;
    if (r.has_l_t_zero) j["l_t_zero_max"] = r.l_t_zero_max;
    return j;
}

}  // namespace mfbsde
