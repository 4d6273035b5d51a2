// SPDX-License-Identifier: Apache-2.0

#include "capmine/params.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "capmine/digest.hpp"
#include "capmine/error.hpp"
#include "capmine/ingest.hpp"

namespace capmine {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::InvalidParams, message); }

json canonical_number(double v) {
    if (v == 0.0) return 0;
    if (std::isfinite(v) && std::fabs(v) < 1e15 && std::floor(v) == v) return static_cast<std::int64_t>(v);
    return v;
}

double to_real(const json& j, const std::string& what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(v)) return v;
    }
    invalid(what + " must be a number");
}

int to_int(const json& j, const std::string& what) {
    if (j.is_number_integer()) {
        const auto v = j.get<std::int64_t>();
        if (v < -1'000'000'000 || v > 1'000'000'000) invalid(what + " is out of range");
        return static_cast<int>(v);
    }
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (std::floor(v) == v && std::fabs(v) <= 1e9) return static_cast<int>(v);
    }
    invalid(what + " must be an integer");
}

double parse_real_text(std::string_view s, const std::string& what) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        invalid(what + ": '" + std::string(s) + "' is not a number");
    }
    return v;
}

void parse_pairs(std::string_view item, AttributeThresholds& out, const std::string& what) {
    while (!item.empty()) {
        const auto comma = item.find(',');
        const auto part = item.substr(0, comma);
        item = comma == std::string_view::npos ? std::string_view{} : item.substr(comma + 1);
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string_view::npos) {
            out.fallback = parse_real_text(part, what);
        } else {
            const auto name = part.substr(0, eq);
            if (name.empty()) invalid(what + ": empty attribute name");
            const double v = parse_real_text(part.substr(eq + 1), what);
            if (name == "*") {
                out.fallback = v;
            } else {
                out.per_attribute[std::string(name)] = v;
            }
        }
    }
}

AttributeThresholds thresholds_from_json(const json& j, const std::string& what) {
    AttributeThresholds out;
    if (j.is_number()) {
        out.fallback = j.get<double>();
    } else if (j.is_string()) {
        parse_pairs(j.get_ref<const std::string&>(), out, what);
    } else if (j.is_object()) {
        if (j.contains("per_attribute") || j.contains("default")) {
            for (const auto& [k, v] : j.items()) {
                if (k == "default") {
                    if (!v.is_null()) out.fallback = to_real(v, what + ".default");
                } else if (k == "per_attribute") {
                    if (!v.is_object()) invalid(what + ".per_attribute must be an object");
                    for (const auto& [a, x] : v.items()) out.per_attribute[a] = to_real(x, what + "." + a);
                } else if (k != "mode") {
                    invalid(what + ": unexpected key '" + k + "'");
                }
            }
        } else {
            for (const auto& [a, x] : j.items()) {
                if (a == "*") {
                    out.fallback = to_real(x, what + ".*");
                } else {
                    out.per_attribute[a] = to_real(x, what + "." + a);
                }
            }
        }
    } else {
        invalid(what + " must be a number, string or object");
    }
    return out;
}

EpsilonSpec epsilon_from_json(const json& j) {
    EpsilonSpec out;
    if (j.is_string()) return parse_epsilon_syntax({j.get<std::string>()});
    if (j.is_object() && j.contains("mode")) {
        const auto mode = j.at("mode");
        if (mode == "relative") {
            out.mode = EpsilonSpec::Mode::relative;
            for (const auto& [k, v] : j.items()) {
                if (k != "mode" && k != "fraction") invalid("epsilon: unexpected key '" + k + "'");
            }
            if (!j.contains("fraction")) invalid("epsilon.fraction is required in relative mode");
            out.relative_fraction = to_real(j.at("fraction"), "epsilon.fraction");
            return out;
        }
        if (mode != "absolute") invalid("epsilon.mode must be 'absolute' or 'relative'");
    }
    if (j.is_object() && j.contains("relative") && j.size() == 1) {
        out.mode = EpsilonSpec::Mode::relative;
        out.relative_fraction = to_real(j.at("relative"), "epsilon.relative");
        return out;
    }
    out.absolute = thresholds_from_json(j, "epsilon");
    return out;
}

json thresholds_to_json(const AttributeThresholds& t) {
    json per = json::object();
    for (const auto& [a, v] : t.per_attribute) {
        if (t.fallback && *t.fallback == v) continue;
        per[a] = canonical_number(v);
    }
    json out = json::object();
    out["default"] = t.fallback ? canonical_number(*t.fallback) : json(nullptr);
    out["per_attribute"] = std::move(per);
    return out;
}

void check_thresholds(const AttributeThresholds& t, const std::string& what, ErrorCode code) {
    auto bad = [](double v) { return !(v >= 0.0) || !std::isfinite(v); };
    if (t.fallback && bad(*t.fallback)) throw Error(code, what + " must be a finite value >= 0");
    for (const auto& [a, v] : t.per_attribute) {
        if (bad(v)) throw Error(code, what + " for '" + a + "' must be a finite value >= 0");
    }
}

}  // namespace

std::optional<double> AttributeThresholds::resolve(const std::string& attribute) const {
    if (auto it = per_attribute.find(attribute); it != per_attribute.end()) return it->second;
    return fallback;
}

std::string_view direction_name(DirectionMode mode) noexcept {
    return mode == DirectionMode::signed_mode ? "signed" : "unsigned";
}

void validate_params(const MiningParams& p, const Dataset* dataset) {
    if (p.epsilon.mode == EpsilonSpec::Mode::absolute) {
        check_thresholds(p.epsilon.absolute, "epsilon", ErrorCode::NegativeEpsilon);
    } else if (!(p.epsilon.relative_fraction >= 0.0) || !std::isfinite(p.epsilon.relative_fraction)) {
        throw Error(ErrorCode::NegativeEpsilon, "relative epsilon must be a finite fraction >= 0");
    }
    check_thresholds(p.max_error, "max_error", ErrorCode::InvalidParams);
    if (!(p.eta_meters >= 0.0) || !std::isfinite(p.eta_meters)) {
        throw Error(ErrorCode::NegativeEta, "eta_meters must be a finite distance >= 0");
    }
    if (p.mu < 2) {
        invalid("mu must be >= 2: a pattern needs at least two attributes" +
                std::string(p.distinct_attributes ? " and distinct_attributes is on" : ""));
    }
    if (p.psi < 1) invalid("psi must be >= 1");
    if (dataset == nullptr) return;

    if (!dataset->sensors.empty() && static_cast<std::size_t>(p.psi) + 1 > dataset->grid.count) {
        invalid("psi = " + std::to_string(p.psi) + " exceeds the " +
                std::to_string(dataset->grid.count > 0 ? dataset->grid.count - 1 : 0) +
                " deltas available in the dataset");
    }
    auto check_known = [&](const AttributeThresholds& t, const std::string& what) {
        for (const auto& [a, v] : t.per_attribute) {
            if (!std::binary_search(dataset->attributes.begin(), dataset->attributes.end(), a)) {
                invalid(what + " names unknown attribute '" + a + "'");
            }
        }
        if (!t.fallback) {
            for (const auto& a : dataset->attributes) {
                if (!t.per_attribute.contains(a)) invalid(what + " has no value for attribute '" + a + "'");
            }
        }
    };
    if (p.epsilon.mode == EpsilonSpec::Mode::absolute) check_known(p.epsilon.absolute, "epsilon");
    check_known(p.max_error, "max_error");
}

json params_to_json(const MiningParams& p) {
    json out = json::object();
    out["direction_mode"] = std::string(direction_name(p.direction));
    out["distinct_attributes"] = p.distinct_attributes;
    if (p.epsilon.mode == EpsilonSpec::Mode::relative) {
        out["epsilon"] = json{{"mode", "relative"}, {"fraction", canonical_number(p.epsilon.relative_fraction)}};
    } else {
        json e = thresholds_to_json(p.epsilon.absolute);
        e["mode"] = "absolute";
        out["epsilon"] = std::move(e);
    }
    out["eta_meters"] = canonical_number(p.eta_meters);
    AttributeThresholds max_error = p.max_error;
    if (!max_error.fallback) max_error.fallback = 0.0;
    out["max_error"] = thresholds_to_json(max_error);
    out["maximal"] = p.maximal;
    out["mu"] = p.mu;
    out["psi"] = p.psi;
    return out;
}

MiningParams params_from_json(const json& j) {
    if (!j.is_object()) invalid("params must be a JSON object");
    MiningParams p;
    bool have_epsilon = false;
    bool have_eta = false;
    bool have_mu = false;
    bool have_psi = false;
    for (const auto& [k, v] : j.items()) {
        if (k == "epsilon") {
            p.epsilon = epsilon_from_json(v);
            have_epsilon = true;
        } else if (k == "eta_meters" || k == "eta") {
            p.eta_meters = to_real(v, k);
            have_eta = true;
        } else if (k == "mu") {
            p.mu = to_int(v, "mu");
            have_mu = true;
        } else if (k == "psi") {
            p.psi = to_int(v, "psi");
            have_psi = true;
        } else if (k == "distinct_attributes") {
            if (!v.is_boolean()) invalid("distinct_attributes must be a boolean");
            p.distinct_attributes = v.get<bool>();
        } else if (k == "maximal") {
            if (!v.is_boolean()) invalid("maximal must be a boolean");
            p.maximal = v.get<bool>();
        } else if (k == "max_error") {
            p.max_error = thresholds_from_json(v, "max_error");
            if (!p.max_error.fallback) p.max_error.fallback = 0.0;
        } else if (k == "direction_mode" || k == "direction") {
            if (v == "signed") {
                p.direction = DirectionMode::signed_mode;
            } else if (v == "unsigned") {
                p.direction = DirectionMode::unsigned_mode;
            } else {
                invalid("direction_mode must be 'signed' or 'unsigned'");
            }
        } else {
            invalid("unknown parameter '" + k + "'");
        }
    }
    if (!have_epsilon) invalid("epsilon is required");
    if (!have_eta) invalid("eta_meters is required");
    if (!have_mu) invalid("mu is required");
    if (!have_psi) invalid("psi is required");
    return p;
}

std::string canonical_params(const MiningParams& params) { return params_to_json(params).dump(); }

std::string params_digest(const MiningParams& params) { return sha256_hex(canonical_params(params)); }

EpsilonSpec parse_epsilon_syntax(const std::vector<std::string>& items) {
    EpsilonSpec out;
    std::vector<std::string> absolute;
    for (const auto& item : items) {
        if (item.starts_with("rel:")) {
            out.mode = EpsilonSpec::Mode::relative;
            out.relative_fraction = parse_real_text(std::string_view(item).substr(4), "epsilon");
        } else {
            absolute.push_back(item);
        }
    }
    if (out.mode == EpsilonSpec::Mode::relative) {
        if (!absolute.empty()) invalid("epsilon: relative mode cannot be combined with absolute values");
        return out;
    }
    out.absolute = parse_threshold_syntax(absolute);
    return out;
}

AttributeThresholds parse_threshold_syntax(const std::vector<std::string>& items) {
    AttributeThresholds out;
    for (const auto& item : items) parse_pairs(item, out, "threshold");
    return out;
}

}  // namespace capmine
