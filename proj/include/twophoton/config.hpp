#pragma once

// Scenario configuration: typed settings for every simulated experiment and a
// `section.key = value` text format with explicit unit suffixes.

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "twophoton/apparatus.hpp"
#include "twophoton/errors.hpp"
#include "twophoton/pump.hpp"

namespace twophoton {

enum class PumpKind { coherent, phase_diffusion, multimode_comb, pulsed };

struct PumpSettings {
    PumpKind kind = PumpKind::phase_diffusion;
    PhaseDiffusion diffusion{coherence_length(0.1e-9, 407e-9)};
    MultimodeComb comb = default_diode_comb();
    Pulsed pulsed{};

    PumpModel model() const
    {
        switch (kind) {
        case PumpKind::coherent: return Coherent{};
        case PumpKind::phase_diffusion: return diffusion;
        case PumpKind::multimode_comb: return comb;
        case PumpKind::pulsed: return pulsed;
        }
        return Coherent{};
    }
};

struct HomSettings {
    double injected_visibility = 0.978;
    double half_range = 0.8e-12; // s
    std::size_t points = 121;
    double rate_scale = 4000.0; // counts/s
    double dwell = 5.0;         // s
};

struct MichelsonSettings {
    double max_delay = 20e-3; // m
    double step = 5e-6;       // m
};

struct RunConfig {
    Apparatus app;
    PumpSettings pump;
    DriftModel drift;
    PhaseScanSettings scan;
    HomSettings hom;
    MichelsonSettings michelson;
};

enum class ValueKind { length, time, angle, number, integer, boolean, word };

using ConfigValue = std::variant<double, long long, bool, std::string>;

struct ConfigEntry {
    std::string key;
    ConfigValue value;
    int line = 0;
};

using ConfigOverrides = std::vector<ConfigEntry>;

namespace detail {

struct KeySpec {
    ValueKind kind;
    std::function<void(RunConfig&, const ConfigValue&)> apply;
    std::function<std::string(const RunConfig&)> show;
};

inline double as_double(const ConfigValue& v)
{
    if (const auto* d = std::get_if<double>(&v))
        return *d;
    throw ConfigError("expected a number");
}

inline long long as_int(const ConfigValue& v)
{
    if (const auto* n = std::get_if<long long>(&v))
        return *n;
    throw ConfigError("expected an integer");
}

inline std::string fmt(double v)
{
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
}

inline PumpKind pump_kind_from(const std::string& w)
{
    if (w == "coherent")
        return PumpKind::coherent;
    if (w == "phase_diffusion")
        return PumpKind::phase_diffusion;
    if (w == "multimode_comb")
        return PumpKind::multimode_comb;
    if (w == "pulsed")
        return PumpKind::pulsed;
    throw ConfigError("unknown pump model '" + w + "' (coherent, phase_diffusion, multimode_comb, pulsed)");
}

inline std::string pump_kind_name(PumpKind k)
{
    switch (k) {
    case PumpKind::coherent: return "coherent";
    case PumpKind::phase_diffusion: return "phase_diffusion";
    case PumpKind::multimode_comb: return "multimode_comb";
    case PumpKind::pulsed: return "pulsed";
    }
    return "?";
}

inline void require_positive(double v, const char* what)
{
    if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string(what) + " must be positive");
}

inline const std::map<std::string, KeySpec>& key_table()
{
    using K = ValueKind;
    static const std::map<std::string, KeySpec> table = [] {
        std::map<std::string, KeySpec> t;
        auto num = [&](const std::string& key, ValueKind kind, auto ref, bool positive) {
            t[key] = KeySpec{kind,
                             [ref, positive, key](RunConfig& c, const ConfigValue& v) {
                                 const double x = as_double(v);
                                 if (positive)
                                     require_positive(x, key.c_str());
                                 ref(c) = x;
                             },
                             [ref](const RunConfig& c) { return fmt(ref(const_cast<RunConfig&>(c))); }};
        };
        auto flag = [&](const std::string& key, auto ref) {
            t[key] = KeySpec{K::boolean, [ref](RunConfig& c, const ConfigValue& v) { ref(c) = std::get<bool>(v); },
                             [ref](const RunConfig& c) {
                                 return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false");
                             }};
        };

        num("pump_wavelength", K::length, [](RunConfig& c) -> double& { return c.app.pump_wavelength; }, true);
        num("pdc_wavelength", K::length, [](RunConfig& c) -> double& { return c.app.pdc_wavelength; }, true);
        num("pump_mz.imbalance_path", K::length,
            [](RunConfig& c) -> double& { return c.app.pump_mz.imbalance_path; }, false);
        num("pump_mz.phase", K::angle, [](RunConfig& c) -> double& { return c.app.pump_mz.phase; }, false);
        flag("pump_mz.enabled", [](RunConfig& c) -> bool& { return c.app.pump_mz.enabled; });
        t["pump_mz.split.short_power_fraction"] =
            KeySpec{K::number,
                    [](RunConfig& c, const ConfigValue& v) { c.app.pump_mz.split = SplitRatio(as_double(v)); },
                    [](const RunConfig& c) { return fmt(c.app.pump_mz.split.short_power_fraction()); }};
        num("pdc_mz.imbalance_path", K::length,
            [](RunConfig& c) -> double& { return c.app.pdc_mz.imbalance_path; }, false);
        num("pdc_mz.phase", K::angle, [](RunConfig& c) -> double& { return c.app.pdc_mz.phase; }, false);
        flag("pdc_mz.enabled", [](RunConfig& c) -> bool& { return c.app.pdc_mz.enabled; });
        num("hom_delay", K::time, [](RunConfig& c) -> double& { return c.app.hom_delay; }, false);
        t["filter.shape"] = KeySpec{K::word,
                                    [](RunConfig& c, const ConfigValue& v) {
                                        const auto& w = std::get<std::string>(v);
                                        if (w == "gaussian")
                                            c.app.filter.shape = SpectralShape::gaussian;
                                        else if (w == "rectangular")
                                            c.app.filter.shape = SpectralShape::rectangular;
                                        else
                                            throw ConfigError("filter.shape must be gaussian or rectangular");
                                    },
                                    [](const RunConfig& c) { return to_string(c.app.filter.shape); }};
        num("filter.center_wavelength", K::length,
            [](RunConfig& c) -> double& { return c.app.filter.center_wavelength; }, true);
        num("filter.fwhm_wavelength", K::length,
            [](RunConfig& c) -> double& { return c.app.filter.fwhm_wavelength; }, true);
        num("baseline_visibility", K::number, [](RunConfig& c) -> double& { return c.app.baseline_visibility; },
            false);
        num("background_rate", K::number, [](RunConfig& c) -> double& { return c.app.background_rate; }, false);
        num("contamination", K::number, [](RunConfig& c) -> double& { return c.app.contamination; }, false);
        flag("gate.enabled", [](RunConfig& c) -> bool& { return c.app.gate.enabled; });
        t["gate.accepted_slot"] =
            KeySpec{K::integer,
                    [](RunConfig& c, const ConfigValue& v) {
                        const auto s = as_int(v);
                        if (s < 0 || s > 2)
                            throw ConfigError("gate.accepted_slot must be 0, 1 or 2");
                        c.app.gate.accepted_slot = static_cast<int>(s);
                    },
                    [](const RunConfig& c) { return std::to_string(c.app.gate.accepted_slot); }};
        t["gate.slot_width"] = KeySpec{K::time,
                                       [](RunConfig& c, const ConfigValue& v) {
                                           if (std::holds_alternative<std::string>(v)) {
                                               c.app.gate.slot_width.reset();
                                               return;
                                           }
                                           require_positive(as_double(v), "gate.slot_width");
                                           c.app.gate.slot_width = as_double(v);
                                       },
                                       [](const RunConfig& c) {
                                           return c.app.gate.slot_width ? fmt(*c.app.gate.slot_width)
                                                                        : std::string("auto");
                                       }};

        t["pump.model"] = KeySpec{K::word,
                                  [](RunConfig& c, const ConfigValue& v) {
                                      c.pump.kind = pump_kind_from(std::get<std::string>(v));
                                  },
                                  [](const RunConfig& c) { return pump_kind_name(c.pump.kind); }};
        num("pump.coherence_length", K::length,
            [](RunConfig& c) -> double& { return c.pump.diffusion.coherence_length; }, true);
        num("pump.peak_spacing_path", K::length,
            [](RunConfig& c) -> double& { return c.pump.comb.peak_spacing_path; }, true);
        t["pump.mode_count"] = KeySpec{K::integer,
                                       [](RunConfig& c, const ConfigValue& v) {
                                           const auto n = as_int(v);
                                           if (n < 1 || n > 10000)
                                               throw ConfigError("pump.mode_count must lie in [1, 10000]");
                                           c.pump.comb.mode_count = static_cast<int>(n);
                                       },
                                       [](const RunConfig& c) { return std::to_string(c.pump.comb.mode_count); }};
        num("pump.envelope_fwhm_wavelength", K::length,
            [](RunConfig& c) -> double& { return c.pump.comb.envelope_fwhm_wavelength; }, true);
        num("pump.mode_linewidth_path", K::length,
            [](RunConfig& c) -> double& { return c.pump.comb.mode_linewidth_path; }, true);
        num("pump.center_wavelength", K::length,
            [](RunConfig& c) -> double& { return c.pump.comb.center_wavelength; }, true);
        num("pump.pulse_fwhm", K::time, [](RunConfig& c) -> double& { return c.pump.pulsed.pulse_fwhm; }, true);
        num("pump.period", K::time, [](RunConfig& c) -> double& { return c.pump.pulsed.period; }, true);

        num("scan.duration", K::time, [](RunConfig& c) -> double& { return c.scan.duration; }, true);
        t["scan.points"] = KeySpec{K::integer,
                                   [](RunConfig& c, const ConfigValue& v) {
                                       const auto n = as_int(v);
                                       if (n < 10)
                                           throw ConfigError("scan.points must be at least 10");
                                       c.scan.points = static_cast<std::size_t>(n);
                                   },
                                   [](const RunConfig& c) { return std::to_string(c.scan.points); }};
        num("scan.rate_scale", K::number, [](RunConfig& c) -> double& { return c.scan.rate_scale; }, true);
        t["drift.span_periods"] = KeySpec{K::number,
                                          [](RunConfig& c, const ConfigValue& v) {
                                              c.drift.span_phase = 2.0 * kPi * as_double(v);
                                          },
                                          [](const RunConfig& c) { return fmt(c.drift.span_phase / (2.0 * kPi)); }};
        num("drift.relax_time", K::time, [](RunConfig& c) -> double& { return c.drift.relax_time; }, false);
        num("drift.start_phase", K::angle, [](RunConfig& c) -> double& { return c.drift.start_phase; }, false);

        num("hom.injected_visibility", K::number,
            [](RunConfig& c) -> double& { return c.hom.injected_visibility; }, false);
        num("hom.half_range", K::time, [](RunConfig& c) -> double& { return c.hom.half_range; }, true);
        t["hom.points"] = KeySpec{K::integer,
                                  [](RunConfig& c, const ConfigValue& v) {
                                      const auto n = as_int(v);
                                      if (n < 10)
                                          throw ConfigError("hom.points must be at least 10");
                                      c.hom.points = static_cast<std::size_t>(n);
                                  },
                                  [](const RunConfig& c) { return std::to_string(c.hom.points); }};
        num("hom.rate_scale", K::number, [](RunConfig& c) -> double& { return c.hom.rate_scale; }, true);
        num("michelson.max_delay", K::length, [](RunConfig& c) -> double& { return c.michelson.max_delay; }, true);
        num("michelson.step", K::length, [](RunConfig& c) -> double& { return c.michelson.step; }, true);
        return t;
    }();
    return table;
}

inline std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(const std::string& text)
{
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v))
        return std::nullopt;
    return v;
}

// Splits "60 cm" / "60cm" into number and suffix.
inline std::pair<std::string, std::string> split_unit(const std::string& text)
{
    std::size_t i = 0;
    while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.' ||
                               text[i] == '-' || text[i] == '+' ||
                               ((text[i] == 'e' || text[i] == 'E') && i > 0 && i + 1 < text.size() &&
                                (std::isdigit(static_cast<unsigned char>(text[i + 1])) || text[i + 1] == '-' ||
                                 text[i + 1] == '+'))))
        ++i;
    return {trim(text.substr(0, i)), trim(text.substr(i))};
}

inline double unit_factor(ValueKind kind, const std::string& unit)
{
    static const std::map<std::string, double> lengths{{"m", 1.0},   {"cm", 1e-2}, {"mm", 1e-3},
                                                       {"um", 1e-6}, {"µm", 1e-6}, {"nm", 1e-9}};
    static const std::map<std::string, double> times{{"s", 1.0},    {"min", 60.0}, {"ms", 1e-3}, {"us", 1e-6},
                                                     {"µs", 1e-6},  {"ns", 1e-9},  {"ps", 1e-12},
                                                     {"fs", 1e-15}};
    static const std::map<std::string, double> angles{{"rad", 1.0}, {"deg", kPi / 180.0}, {"pi", kPi}};
    if (unit.empty())
        return 1.0;
    const std::map<std::string, double>* table = nullptr;
    const char* what = "";
    switch (kind) {
    case ValueKind::length: table = &lengths; what = "a length (m, cm, mm, um, nm)"; break;
    case ValueKind::time: table = &times; what = "a time (s, min, ms, us, ns, ps, fs)"; break;
    case ValueKind::angle: table = &angles; what = "an angle (rad, deg, pi)"; break;
    default: throw ConfigError("unit '" + unit + "' not allowed for a dimensionless value");
    }
    const auto it = table->find(unit);
    if (it == table->end())
        throw ConfigError("unit '" + unit + "' does not match: expected " + what);
    return it->second;
}

inline ConfigValue parse_value(ValueKind kind, const std::string& text)
{
    if (text.empty())
        throw ConfigError("missing value");
    switch (kind) {
    case ValueKind::boolean:
        if (text == "true" || text == "on" || text == "yes" || text == "1")
            return true;
        if (text == "false" || text == "off" || text == "no" || text == "0")
            return false;
        throw ConfigError("expected a boolean, got '" + text + "'");
    case ValueKind::word:
        return text;
    case ValueKind::integer: {
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size())
            throw ConfigError("expected an integer, got '" + text + "'");
        return v;
    }
    default: {
        if (text == "auto" && kind == ValueKind::time)
            return text;
        const auto [number, unit] = split_unit(text);
        const auto v = parse_number(number);
        if (!v)
            throw ConfigError("expected a number, got '" + text + "'");
        return *v * unit_factor(kind, unit);
    }
    }
}

inline std::string line_error(int line, const std::string& message)
{
    return "config line " + std::to_string(line) + ": " + message;
}

} // namespace detail

inline std::vector<std::string> config_keys()
{
    std::vector<std::string> keys;
    for (const auto& [k, _] : detail::key_table())
        keys.push_back(k);
    return keys;
}

// Parses `section.key = value` lines ('#' starts a comment). Each value is
// typed and range-checked; errors name the offending line.
inline ConfigOverrides parse_config_text(const std::string& text)
{
    ConfigOverrides out;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    RunConfig scratch;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        const std::string stripped = detail::trim(raw);
        if (stripped.empty())
            continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(detail::line_error(line, "expected 'key = value'"));
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        const auto& table = detail::key_table();
        const auto spec = table.find(key);
        if (spec == table.end())
            throw ConfigError(detail::line_error(line, "unknown key '" + key + "'"));
        if (const auto prev = seen.find(key); prev != seen.end())
            throw ConfigError(detail::line_error(
                line, "duplicate key '" + key + "' (first set on line " + std::to_string(prev->second) + ")"));
        seen[key] = line;
        try {
            ConfigValue v = detail::parse_value(spec->second.kind, value);
            spec->second.apply(scratch, v);
            out.push_back({key, std::move(v), line});
        } catch (const ConfigError& e) {
            throw ConfigError(detail::line_error(line, key + ": " + e.what()));
        } catch (const DomainError& e) {
            throw ConfigError(detail::line_error(line, key + ": " + e.what()));
        }
    }
    return out;
}

inline ConfigOverrides parse_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::ios_base::failure("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

// Applies overrides in file order and re-validates the result.
inline void apply_overrides(RunConfig& config, const ConfigOverrides& overrides)
{
    for (const auto& e : overrides) {
        try {
            detail::key_table().at(e.key).apply(config, e.value);
        } catch (const std::exception& ex) {
            throw ConfigError(detail::line_error(e.line, e.key + ": " + ex.what()));
        }
    }
    try {
        config.app.validate();
        validate(config.pump.model());
    } catch (const std::exception& ex) {
        throw ConfigError(std::string("configuration invalid after overrides: ") + ex.what());
    }
}

// Resolved configuration in the same `key = value` format.
inline std::string dump_config(const RunConfig& config)
{
    std::ostringstream s;
    for (const auto& [key, spec] : detail::key_table())
        s << key << " = " << spec.show(config) << "\n";
    return s.str();
}

} // namespace twophoton
