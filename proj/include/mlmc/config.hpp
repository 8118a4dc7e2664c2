#pragma once

// Strict INI-style experiment configuration.
//
//   # comment
//   [section]
//   key = value
//
// Unknown sections or keys, duplicate keys and malformed lines are errors.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mlmc/ctmc.hpp"
#include "mlmc/driver.hpp"
#include "mlmc/error.hpp"
#include "mlmc/payoffs.hpp"
#include "mlmc/samplers.hpp"
#include "mlmc/sde.hpp"

namespace mlmc {

class ParseError : public Error {
  public:
    ParseError(int line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }
    int line() const { return line_; }

  private:
    int line_;
};

/// A value failed its constraint; key() is "section.key".
class ValidationError : public Error {
  public:
    ValidationError(std::string key, const std::string& what, int line = 0)
        : Error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + key + ": " + what),
          key_(std::move(key))
    {
    }
    const std::string& key() const { return key_; }

  private:
    std::string key_;
};

struct ModelConfig {
    /// gbm, custom-ref (a built-in model named by `ref`), or synthetic (the
    /// zero-variance driver check).
    std::string kind = "gbm";
    std::string ref;
    double s0 = 100.0;
    double drift = 0.05;
    double sigma = 0.2;
    double horizon = 1.0;
    int steps0 = 1;
    double mean_level = 0.0;
};

struct CtmcReactionConfig {
    double rate = 0.0;
    std::vector<int> reactants;
    std::vector<std::int64_t> change;
};

struct CtmcConfig {
    std::vector<CtmcReactionConfig> reactions;
    std::vector<std::int64_t> x0;
    double horizon = 1.0;
    int steps0 = 1;
    std::size_t output = 0;
};

struct MultiConfig {
    std::vector<double> eps;
    std::vector<double> strikes;
};

struct ExperimentConfig {
    std::optional<ModelConfig> model;
    std::optional<PayoffSpec> payoff;
    SchemeKind scheme = SchemeKind::Milstein;
    EstimatorKind estimator = EstimatorKind::Natural;
    MlmcConfig mlmc;
    std::optional<CtmcConfig> ctmc;
    std::optional<MultiConfig> multi;
    std::string output_dir = ".";

    bool is_ctmc() const { return ctmc.has_value(); }
    bool is_synthetic() const { return model && model->kind == "synthetic"; }
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

struct RawEntry {
    std::string value;
    int line = 0;
};

/// Reads one section's keys, removing them as they are consumed so that
/// leftovers can be reported as unknown.
class SectionReader {
  public:
    SectionReader(std::string name, std::map<std::string, RawEntry> entries)
        : name_(std::move(name)), entries_(std::move(entries))
    {
    }

    std::optional<RawEntry> take(const std::string& key)
    {
        auto it = entries_.find(key);
        if (it == entries_.end())
            return std::nullopt;
        RawEntry e = it->second;
        entries_.erase(it);
        return e;
    }

    std::string qualified(const std::string& key) const { return name_ + "." + key; }

    template <class T>
    std::optional<T> number(const std::string& key)
    {
        const auto e = take(key);
        if (!e)
            return std::nullopt;
        return parse_number<T>(e->value, qualified(key), e->line);
    }

    std::optional<std::string> text(const std::string& key)
    {
        const auto e = take(key);
        if (!e)
            return std::nullopt;
        return e->value;
    }

    template <class T>
    std::optional<std::vector<T>> list(const std::string& key)
    {
        const auto e = take(key);
        if (!e)
            return std::nullopt;
        std::vector<T> out;
        for (auto part : split(e->value, ','))
            out.push_back(parse_number<T>(part, qualified(key), e->line));
        return out;
    }

    /// Remaining keys, e.g. numbered entries such as reaction1, reaction2.
    std::map<std::string, RawEntry>& rest() { return entries_; }

    void reject_unknown() const
    {
        if (!entries_.empty()) {
            const auto& [k, e] = *entries_.begin();
            throw ParseError(e.line, "unknown key '" + k + "' in section [" + name_ + "]");
        }
    }

    template <class T>
    static T parse_number(std::string_view s, const std::string& key, int line)
    {
        T v{};
        const auto* end = s.data() + s.size();
        auto [ptr, ec] = std::from_chars(s.data(), end, v);
        if (ec != std::errc() || ptr != end || s.empty())
            throw ValidationError(key, "'" + std::string(s) + "' is not a valid number", line);
        if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(v))
                throw ValidationError(key, "value must be finite", line);
        }
        return v;
    }

  private:
    std::string name_;
    std::map<std::string, RawEntry> entries_;
};

}  // namespace detail

/// Parses and validates an experiment configuration.
inline ExperimentConfig parse_config(std::string_view text)
{
    using detail::SectionReader;
    std::map<std::string, std::map<std::string, detail::RawEntry>> sections;
    std::map<std::string, int> key_lines;
    std::string current;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        std::string_view line = detail::trim(raw);
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = detail::trim(line.substr(0, hash));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError(line_no, "malformed section header");
            current = std::string(detail::trim(line.substr(1, line.size() - 2)));
            static const char* known[] = {"model", "payoff", "scheme", "mlmc", "ctmc", "multi", "output"};
            if (std::find(std::begin(known), std::end(known), current) == std::end(known))
                throw ParseError(line_no, "unknown section [" + current + "]");
            if (sections.count(current))
                throw ParseError(line_no, "duplicate section [" + current + "]");
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(line_no, "expected 'key = value'");
        if (current.empty())
            throw ParseError(line_no, "key outside of any section");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string value(detail::trim(line.substr(eq + 1)));
        if (key.empty())
            throw ParseError(line_no, "empty key");
        auto& sec = sections[current];
        if (sec.count(key))
            throw ParseError(line_no, "duplicate key '" + key + "' in section [" + current + "]");
        sec[key] = {value, line_no};
        key_lines[current + "." + key] = line_no;
    }

    auto invalid = [&](const std::string& key, const std::string& what) {
        const auto it = key_lines.find(key);
        return ValidationError(key, what, it == key_lines.end() ? 0 : it->second);
    };

    auto reader = [&](const std::string& name) -> std::optional<SectionReader> {
        auto it = sections.find(name);
        if (it == sections.end())
            return std::nullopt;
        return SectionReader(name, it->second);
    };

    ExperimentConfig cfg;

    if (auto r = reader("model")) {
        ModelConfig m;
        if (auto v = r->text("kind"))
            m.kind = *v;
        if (m.kind != "gbm" && m.kind != "custom-ref" && m.kind != "synthetic")
            throw invalid("model.kind", "expected gbm, custom-ref or synthetic");
        if (auto v = r->text("ref"))
            m.ref = *v;
        if (m.kind == "custom-ref" && m.ref != "ou")
            throw invalid("model.ref", "unknown reference model '" + m.ref + "' (available: ou)");
        if (auto v = r->number<double>("s0"))
            m.s0 = *v;
        if (auto v = r->number<double>("drift"))
            m.drift = *v;
        if (auto v = r->number<double>("sigma"))
            m.sigma = *v;
        if (auto v = r->number<double>("T"))
            m.horizon = *v;
        if (auto v = r->number<int>("steps0"))
            m.steps0 = *v;
        if (auto v = r->number<double>("mean_level"))
            m.mean_level = *v;
        r->reject_unknown();
        if (!(m.horizon > 0.0))
            throw invalid("model.T", "must be positive");
        if (m.steps0 < 1)
            throw invalid("model.steps0", "must be at least 1");
        if (!(m.sigma >= 0.0))
            throw invalid("model.sigma", "must be non-negative");
        if (m.kind == "gbm" && !(m.s0 > 0.0))
            throw invalid("model.s0", "must be positive for gbm");
        cfg.model = m;
    }

    if (auto r = reader("payoff")) {
        PayoffSpec p;
        bool discount_set = false;
        if (auto v = r->text("kind")) {
            if (*v == "european") p.kind = PayoffKind::European;
            else if (*v == "asian") p.kind = PayoffKind::Asian;
            else if (*v == "lookback") p.kind = PayoffKind::Lookback;
            else if (*v == "barrier") p.kind = PayoffKind::Barrier;
            else if (*v == "digital") p.kind = PayoffKind::Digital;
            else throw invalid("payoff.kind", "expected european, asian, lookback, barrier or digital");
        }
        if (auto v = r->number<double>("strike"))
            p.strike = *v;
        if (auto v = r->number<double>("barrier"))
            p.barrier = *v;
        if (auto v = r->text("smoothing")) {
            if (*v == "none") p.smoothing = DigitalSmoothing::None;
            else if (*v == "condexp") p.smoothing = DigitalSmoothing::CondExp;
            else if (*v == "splitting") p.smoothing = DigitalSmoothing::Splitting;
            else if (*v == "change-of-measure") p.smoothing = DigitalSmoothing::ChangeOfMeasure;
            else throw invalid("payoff.smoothing", "expected none, condexp, splitting or change-of-measure");
        }
        if (auto v = r->number<int>("subsamples"))
            p.subsamples = *v;
        if (auto v = r->number<double>("discount")) {
            p.discount = *v;
            discount_set = true;
        }
        r->reject_unknown();
        if (p.kind != PayoffKind::Lookback && !(p.strike > 0.0))
            throw invalid("payoff.strike", "must be positive");
        if (p.subsamples < 1)
            throw invalid("payoff.subsamples", "must be at least 1");
        if (!(p.discount > 0.0))
            throw invalid("payoff.discount", "must be positive");
        // Risk-neutral GBM: discount at the drift unless given explicitly.
        if (!discount_set && cfg.model && cfg.model->kind == "gbm")
            p.discount = std::exp(-cfg.model->drift * cfg.model->horizon);
        if (p.kind == PayoffKind::Barrier && cfg.model && !(p.barrier < cfg.model->s0))
            throw invalid("payoff.barrier", "down-and-out barrier must lie below model.s0");
        cfg.payoff = p;
    }

    if (auto r = reader("scheme")) {
        if (auto v = r->text("method")) {
            if (*v == "euler") cfg.scheme = SchemeKind::EulerMaruyama;
            else if (*v == "milstein") cfg.scheme = SchemeKind::Milstein;
            else throw invalid("scheme.method", "expected euler or milstein");
        }
        if (auto v = r->text("estimator")) {
            if (*v == "natural") cfg.estimator = EstimatorKind::Natural;
            else if (*v == "antithetic") cfg.estimator = EstimatorKind::Antithetic;
            else throw invalid("scheme.estimator", "expected natural or antithetic");
        }
        r->reject_unknown();
    }

    if (auto r = reader("mlmc")) {
        MlmcConfig& m = cfg.mlmc;
        if (auto v = r->number<double>("eps"))
            m.eps = *v;
        if (auto v = r->number<int>("refinement"))
            m.refinement = *v;
        if (auto v = r->number<std::int64_t>("n_init"))
            m.n_init = *v;
        if (auto v = r->number<int>("l_min"))
            m.l_min = *v;
        if (auto v = r->number<int>("l_max"))
            m.l_max = *v;
        if (auto v = r->number<std::uint64_t>("seed"))
            m.seed = *v;
        if (auto v = r->number<double>("alpha"))
            m.alpha_override = *v;
        if (auto v = r->number<double>("beta"))
            m.beta_override = *v;
        if (auto v = r->number<double>("gamma"))
            m.gamma_override = *v;
        r->reject_unknown();
        if (!(m.eps > 0.0))
            throw invalid("mlmc.eps", "must be positive");
        if (m.refinement < 2)
            throw invalid("mlmc.refinement", "must be at least 2");
        if (m.n_init < 2)
            throw invalid("mlmc.n_init", "must be at least 2");
        if (m.l_min < 0)
            throw invalid("mlmc.l_min", "must be non-negative");
        if (m.l_max < m.l_min)
            throw invalid("mlmc.l_max", "must not be below l_min");
        if (m.alpha_override && !(*m.alpha_override > 0.0))
            throw invalid("mlmc.alpha", "must be positive");
    }

    if (auto r = reader("ctmc")) {
        CtmcConfig c;
        if (auto v = r->list<std::int64_t>("x0"))
            c.x0 = *v;
        if (auto v = r->number<double>("T"))
            c.horizon = *v;
        if (auto v = r->number<int>("steps0"))
            c.steps0 = *v;
        if (auto v = r->number<std::size_t>("output"))
            c.output = *v;
        // reactionN = rate ; reactant counts ; state change
        std::map<int, CtmcReactionConfig> numbered;
        for (auto& [key, entry] : r->rest()) {
            if (key.rfind("reaction", 0) != 0)
                throw ParseError(entry.line, "unknown key '" + key + "' in section [ctmc]");
            const std::string id = key.substr(8);
            int n = 0;
            auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), n);
            if (id.empty() || ec != std::errc() || ptr != id.data() + id.size())
                throw ParseError(entry.line, "unknown key '" + key + "' in section [ctmc]");
            const auto parts = detail::split(entry.value, ';');
            if (parts.size() != 3)
                throw ValidationError("ctmc." + key, "expected 'rate ; reactants ; change'", entry.line);
            CtmcReactionConfig rc;
            rc.rate = SectionReader::parse_number<double>(parts[0], "ctmc." + key, entry.line);
            for (auto p : detail::split(parts[1], ','))
                rc.reactants.push_back(SectionReader::parse_number<int>(p, "ctmc." + key, entry.line));
            for (auto p : detail::split(parts[2], ','))
                rc.change.push_back(SectionReader::parse_number<std::int64_t>(p, "ctmc." + key, entry.line));
            if (!(rc.rate >= 0.0))
                throw ValidationError("ctmc." + key, "rate must be non-negative", entry.line);
            for (int k : rc.reactants)
                if (k < 0)
                    throw ValidationError("ctmc." + key, "reactant counts must be non-negative", entry.line);
            numbered[n] = rc;
        }
        r->rest().clear();
        for (auto& [n, rc] : numbered)
            c.reactions.push_back(rc);
        if (c.x0.empty())
            throw invalid("ctmc.x0", "initial state is required");
        if (!(c.horizon > 0.0))
            throw invalid("ctmc.T", "must be positive");
        if (c.steps0 < 1)
            throw invalid("ctmc.steps0", "must be at least 1");
        if (c.output >= c.x0.size())
            throw invalid("ctmc.output", "species index out of range");
        for (const auto& rc : c.reactions)
            if (rc.reactants.size() != c.x0.size() || rc.change.size() != c.x0.size())
                throw invalid("ctmc.reaction", "reactant and change vectors must match x0 in length");
        cfg.ctmc = c;
    }

    if (auto r = reader("multi")) {
        MultiConfig mc;
        if (auto v = r->list<double>("eps"))
            mc.eps = *v;
        if (auto v = r->list<double>("strikes"))
            mc.strikes = *v;
        r->reject_unknown();
        if (mc.eps.empty())
            throw invalid("multi.eps", "at least one accuracy is required");
        for (double e : mc.eps)
            if (!(e > 0.0))
                throw invalid("multi.eps", "every entry must be positive");
        if (mc.strikes.size() != mc.eps.size())
            throw invalid("multi.strikes", "need one strike per eps entry");
        for (double k : mc.strikes)
            if (!(k > 0.0))
                throw invalid("multi.strikes", "every strike must be positive");
        cfg.multi = mc;
    }

    if (auto r = reader("output")) {
        if (auto v = r->text("directory"))
            cfg.output_dir = *v;
        r->reject_unknown();
    }

    const bool sde = cfg.model.has_value();
    if (sde == cfg.ctmc.has_value())
        throw invalid("config", "exactly one of [model]+[payoff] or [ctmc] is required");
    if (sde && !cfg.is_synthetic() && !cfg.payoff)
        throw invalid("payoff", "section [payoff] is required with [model]");
    if (cfg.ctmc && cfg.mlmc.refinement != 2)
        throw invalid("mlmc.refinement", "tau-leaping coupling requires refinement = 2");
    if (cfg.multi && (cfg.ctmc || cfg.is_synthetic()))
        throw invalid("multi", "multi-output runs need an SDE model and payoff");
    if (cfg.payoff && cfg.payoff->kind == PayoffKind::Lookback && cfg.multi)
        throw invalid("multi", "multi-output strikes do not apply to the lookback payoff");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

//---------------------------------------------------------------------------//
// Building models and samplers
//---------------------------------------------------------------------------//

inline SdeModel build_sde_model(const ModelConfig& m)
{
    if (m.kind == "custom-ref" && m.ref == "ou") {
        // Ornstein-Uhlenbeck dX = drift (mean_level - X) dt + sigma dW.
        const double k = m.drift, mu = m.mean_level, s = m.sigma;
        return {[k, mu](double x) { return k * (mu - x); }, [s](double) { return s; }, [](double) { return 0.0; },
                m.s0, m.horizon, m.steps0};
    }
    return SdeModel::gbm(m.s0, m.drift, m.sigma, m.horizon, m.steps0);
}

inline CtmcModel build_ctmc_model(const CtmcConfig& c)
{
    CtmcModel model;
    model.x0 = c.x0;
    model.horizon = c.horizon;
    model.steps0 = c.steps0;
    for (const auto& rc : c.reactions)
        model.reactions.push_back(Reaction::mass_action(rc.rate, rc.reactants, rc.change));
    return model;
}

}  // namespace mlmc
