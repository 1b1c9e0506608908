#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lockstep/experiment.hpp"

namespace py = pybind11;
using namespace lockstep;

namespace {

Rational rational_arg(const std::string& text, const char* what) {
    auto r = Rational::parse(text);
    if (!r) throw ConfigInvalid(std::string("cannot parse ") + what + ": " + text);
    return *r;
}

ChoiceDistribution dist_from(const std::vector<std::pair<Payload, std::string>>& probs) {
    std::vector<std::pair<Payload, Rational>> mass;
    for (auto& [p, m] : probs) mass.emplace_back(p, rational_arg(m, "mass"));
    return ChoiceDistribution::from_rationals(std::move(mass));
}

py::dict record_dict(const RunRecord& r) {
    py::dict out;
    out["seed"] = r.seed;
    out["scheduler"] = r.scheduler;
    out["rounds_used"] = r.rounds_used;
    py::dict decided;
    for (size_t p = 1; p < r.decided.size(); ++p)
        decided[py::int_(p)] =
            r.decided[p] < 0 ? py::object(py::none()) : py::object(py::int_(r.decided[p]));
    out["decided"] = decided;
    out["in_class_through_round"] = r.in_class_through_round;
    out["per_round_group_success"] = r.per_round_group_success;
    out["all_decided"] = r.all_decided;
    return out;
}

ExperimentConfig config_from(const py::dict& kv) {
    ExperimentConfig cfg;
    for (auto item : kv)
        apply_config_kv(cfg, py::cast<std::string>(item.first),
                        py::cast<std::string>(py::str(item.second)));
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "asynchronous agreement simulator core";

    py::register_exception<ConfigInvalid>(m, "ConfigInvalid");
    py::register_exception<PropertyViolation>(m, "PropertyViolationError");
    py::register_exception<PreconditionViolated>(m, "PreconditionViolated");

    m.def(
        "adjust",
        [](const std::vector<std::pair<Payload, std::string>>& probs, long long t,
           const std::string& eps) {
            auto dt = adjust(dist_from(probs), t, rational_arg(eps, "eps"));
            py::dict out;
            out["star"] = dt.star;
            py::dict masses, counts;
            auto cs = dt.counts();
            for (auto& [s, mass] : dt.mass) {
                masses[py::str(s)] = mass.str();
                counts[py::str(s)] = cs.at(s);
            }
            out["mass"] = masses;
            out["counts"] = counts;
            return out;
        },
        py::arg("probs"), py::arg("t"), py::arg("eps"),
        "Adjust a distribution so every mass is a positive multiple of 1/t.");

    m.def(
        "default_eps",
        [](const std::string& c, int R, long long t) {
            return default_eps(rational_arg(c, "c"), R, t).str();
        },
        py::arg("c"), py::arg("R"), py::arg("t"));

    m.def(
        "chain_length",
        [](int groups, int t, int rounds, const std::string& protocol,
           const std::string& eps) {
            GroupLayout lay = GroupLayout::make(groups * t, t);
            auto pf = make_protocol(protocol, lay.n, lay.t);
            Rational e = eps.empty() ? default_eps(lay.c, pf->choice_bound(), t)
                                     : rational_arg(eps, "eps");
            ChainGenerator gen(lay, *pf, rounds, e);
            long long classes = 0;
            while (gen.advance()) ++classes;
            return classes;
        },
        py::arg("groups"), py::arg("t"), py::arg("rounds"),
        py::arg("protocol") = "benor-style", py::arg("eps") = "",
        "Number of execution classes in the lockstep chain.");

    m.def(
        "verify_chain",
        [](int groups, int t, int rounds, const std::string& protocol,
           const std::string& eps, uint64_t class_budget) {
            GroupLayout lay = GroupLayout::make(groups * t, t);
            auto pf = make_protocol(protocol, lay.n, lay.t);
            Rational e = eps.empty() ? default_eps(lay.c, pf->choice_bound(), t)
                                     : rational_arg(eps, "eps");
            VerifyOptions opts;
            opts.class_budget = class_budget;
            ChainReport rep = verify_chain(lay, *pf, rounds, e, opts);
            py::dict out;
            out["ok"] = rep.ok;
            out["classes"] = rep.classes;
            out["budget_exhausted"] = rep.budget_exhausted;
            return out;
        },
        py::arg("groups"), py::arg("t"), py::arg("rounds"),
        py::arg("protocol") = "benor-style", py::arg("eps") = "",
        py::arg("class_budget") = 0,
        "Generate the chain and check its structural properties.");

    m.def(
        "run_experiment",
        [](const py::dict& kv) {
            ExperimentResult res = run_experiment(config_from(kv));
            py::dict out;
            py::list records;
            for (auto& r : res.records) records.append(record_dict(r));
            out["records"] = records;
            out["summary"] = summary_to_json(res.stats);
            py::list warnings;
            for (auto& w : res.warnings) warnings.append(w.message);
            out["warnings"] = warnings;
            if (res.witness.witness) {
                py::dict wit;
                wit["index"] = res.witness.index;
                wit["horizon"] = res.witness.E;
                wit["inputs"] = res.witness.witness->inputs;
                out["witness"] = wit;
            }
            return out;
        },
        py::arg("config"),
        "Run a batched experiment; config is a dict of the CLI key=value options.");

    m.def(
        "validate_config",
        [](const py::dict& kv) {
            py::list out;
            for (auto& v : validate_config(config_from(kv)))
                out.append(py::make_tuple(v.hard, v.message));
            return out;
        },
        py::arg("config"));
}
