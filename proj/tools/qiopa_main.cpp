// Experiment runner: every protocol and analysis of the simulator exposed as
// a subcommand, emitting machine-readable CSV/JSON artifacts plus a
// run-manifest describing the resolved configuration.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qiopa/qiopa.hpp"

using json = nlohmann::json;
using namespace qiopa;
namespace fs = std::filesystem;

namespace {

struct RunConfig {
    std::string protocol;
    double gain = 0.5;
    double gain_b = -1.0;  // < 0: same as gain
    double phase = 0.0;
    int cutoff = 40;
    int injection = 1;
    long samples = 10000;
    std::uint64_t seed = 42;
    std::string mode = "enumerate";  // or "sample"
    std::string out_dir;             // resolved later

    // o-filter (applied to macro sites when enabled)
    bool of_enabled = false;
    double of_r = 0.1;
    int of_k = 0;
    double of_basis = 0.0;

    // swap
    std::string outcome = "psi-minus";
    bool physical_bsm = false;

    // chsh / fringe source state
    std::string state_kind = "micro-singlet";
    std::vector<std::array<double, 2>> settings;  // chsh pairs

    // wigner slice
    bool oracle = false;
    std::string axis1 = "a_re";
    std::string axis2 = "b_re";
    double range = 4.0;
    int nodes = 101;

    // fringe
    std::string fixed_site = "A";
    double fixed_phase = 0.0;
    double scan_start = 0.0;
    double scan_stop = 2.0 * kPi;
    int scan_points = 13;
};

GainParams gain_of(const RunConfig& c) { return GainParams::from_g(c.gain); }
GainParams gain_b_of(const RunConfig& c) {
    return GainParams::from_g(c.gain_b < 0 ? c.gain : c.gain_b);
}

BellOutcome parse_outcome(const std::string& s) {
    if (s == "phi-plus") return BellOutcome::PhiPlus;
    if (s == "phi-minus") return BellOutcome::PhiMinus;
    if (s == "psi-plus") return BellOutcome::PsiPlus;
    if (s == "psi-minus") return BellOutcome::PsiMinus;
    throw ConfigError("outcome: expected one of phi-plus|phi-minus|psi-plus|psi-minus, got '" +
                      s + "'");
}

PhaseAxis parse_axis(const std::string& s) {
    if (s == "a_re") return PhaseAxis::ARe;
    if (s == "a_im") return PhaseAxis::AIm;
    if (s == "b_re") return PhaseAxis::BRe;
    if (s == "b_im") return PhaseAxis::BIm;
    throw ConfigError("axis: expected one of a_re|a_im|b_re|b_im, got '" + s + "'");
}

EstimationMode parse_mode(const std::string& s) {
    if (s == "enumerate") return EstimationMode::Enumerate;
    if (s == "sample") return EstimationMode::Sample;
    throw ConfigError("mode: expected enumerate|sample, got '" + s + "'");
}

void validate_config(const RunConfig& c) {
    if (!(c.gain >= 0.0)) throw ConfigError("gain: must be >= 0");
    if (c.gain_b >= 0.0 && !(c.gain_b >= 0.0)) throw ConfigError("gain_b: must be >= 0");
    if (c.cutoff < 1) throw ConfigError("cutoff: must be >= 1");
    if (c.injection != 1 && c.injection != 2) throw ConfigError("injection: must be 1 or 2");
    if (c.samples < 1) throw ConfigError("samples: must be >= 1");
    if (c.of_enabled && (c.of_r < 0.0 || c.of_r >= 1.0))
        throw ConfigError("of_r: must be in [0, 1)");
    if (c.of_enabled && c.of_k < 0) throw ConfigError("of_k: must be >= 0");
    if (c.nodes < 2) throw ConfigError("nodes: must be >= 2");
    if (c.scan_points < 2) throw ConfigError("scan_points: must be >= 2");
    if (c.fixed_site != "A" && c.fixed_site != "B")
        throw ConfigError("fixed_site: must be A or B");
    (void)parse_mode(c.mode);
    (void)parse_outcome(c.outcome);
    (void)parse_axis(c.axis1);
    (void)parse_axis(c.axis2);
}

json config_json(const RunConfig& c) {
    json j{{"protocol", c.protocol},
           {"gain", c.gain},
           {"gain_b", c.gain_b < 0 ? c.gain : c.gain_b},
           {"phase", c.phase},
           {"cutoff", c.cutoff},
           {"injection", c.injection},
           {"samples", c.samples},
           {"seed", c.seed},
           {"mode", c.mode},
           {"out", c.out_dir},
           {"outcome", c.outcome},
           {"physical_bsm", c.physical_bsm},
           {"state", c.state_kind},
           {"oracle", c.oracle},
           {"axis1", c.axis1},
           {"axis2", c.axis2},
           {"range", c.range},
           {"nodes", c.nodes},
           {"fixed_site", c.fixed_site},
           {"fixed_phase", c.fixed_phase},
           {"scan_start", c.scan_start},
           {"scan_stop", c.scan_stop},
           {"scan_points", c.scan_points}};
    if (c.of_enabled)
        j["filter"] = {{"of_r", c.of_r}, {"of_k", c.of_k}, {"of_basis", c.of_basis}};
    else
        j["filter"] = nullptr;
    if (!c.settings.empty()) {
        json s = json::array();
        for (const auto& p : c.settings) s.push_back({p[0], p[1]});
        j["settings"] = s;
    }
    return j;
}

/// Writes <out>/run_manifest.json next to the artifacts.
struct ManifestWriter {
    explicit ManifestWriter(RunConfig c) : config(std::move(c)) {}

    RunConfig config;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    std::vector<std::string> outputs;
    json diagnostics = json::object();

    void add_output(const fs::path& p) { outputs.push_back(p.filename().string()); }

    void write() const {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json j{{"config", config_json(config)},
               {"versions", {{"qiopa", kVersion}, {"manifest_format", 1}}},
               {"outputs", outputs},
               {"diagnostics", diagnostics},
               {"wall_time_s", wall}};
        auto os = open_output(fs::path(config.out_dir) / "run_manifest.json");
        os << j.dump(2) << '\n';
    }
};

std::optional<OFilterConfig> make_filter(const RunConfig& c) {
    if (!c.of_enabled) return std::nullopt;
    OFilterConfig f;
    f.reflectivity = c.of_r;
    f.threshold = c.of_k;
    f.basis_phase = c.of_basis;
    f.validate();
    return f;
}

/// Source states for chsh/fringe runs. Filters apply to macro sites only.
struct PreparedState {
    BipartiteState state;
    bool site_a_macro = false;
    bool site_b_macro = false;
};

PreparedState prepare_state(const RunConfig& c) {
    const FockCutoff cut{c.cutoff};
    if (c.state_kind == "micro-singlet") {
        return {make_singlet(FockCutoff{std::min(c.cutoff, 2)}), false, false};
    }
    if (c.state_kind == "micro-macro") {
        return {build_micro_macro(gain_of(c), c.phase, cut), false, true};
    }
    if (c.state_kind == "swap") {
        const SwapResult r =
            entanglement_swap(gain_of(c), c.phase, cut, parse_outcome(c.outcome));
        return {r.post_state, true, true};
    }
    if (c.state_kind == "double-amp") {
        return {double_amplify(gain_of(c), gain_b_of(c), c.phase, cut), true, true};
    }
    throw ConfigError("state: expected micro-singlet|micro-macro|swap|double-amp, got '" +
                      c.state_kind + "'");
}

void write_correlation_csv(std::ostream& os,
                           const std::vector<std::array<double, 2>>& phis,
                           const std::vector<CorrelationEstimate>& es) {
    os << "phi_a,phi_b,E,stderr,n_used,n_discarded\n";
    for (std::size_t k = 0; k < es.size(); ++k)
        os << format_double(phis[k][0]) << ',' << format_double(phis[k][1]) << ','
           << format_double(es[k].value) << ',' << format_double(es[k].standard_error) << ','
           << es[k].n_used << ',' << es[k].n_discarded << '\n';
}

json estimate_json(const CorrelationEstimate& e) {
    return {{"E", e.value},
            {"stderr", e.standard_error},
            {"n_used", e.n_used},
            {"n_discarded", e.n_discarded}};
}

// ---------------------------------------------------------------- commands

int run_macrostate(ManifestWriter& mw) {
    const RunConfig& c = mw.config;
    const GainParams gain = gain_of(c);
    const FockCutoff cut{c.cutoff};

    const GammaTable table = GammaTable::build(gain);
    {
        auto os = open_output(fs::path(c.out_dir) / "gamma_table.csv");
        table.write_csv(os);
        mw.add_output("gamma_table.csv");
    }

    const ModeTensor par = build_macro_state(gain, c.phase, MacroBranch::PhiParallel, cut);
    const ModeTensor perp = build_macro_state(gain, c.phase, MacroBranch::PhiPerp, cut);
    const auto [p1, p2] = par.mean_photon_numbers();
    const auto [q1, q2] = perp.mean_photon_numbers();

    json j{{"gain", c.gain},
           {"phase", c.phase},
           {"cutoff", c.cutoff},
           {"gamma_bounds", {{"i_max", table.i_max}, {"j_max", table.j_max}}},
           {"gamma_mass", table.total_mass()},
           {"parallel",
            {{"norm2", par.norm2()}, {"mean_n_phi", p1}, {"mean_n_perp", p2}}},
           {"perp", {{"norm2", perp.norm2()}, {"mean_n_phi", q1}, {"mean_n_perp", q2}}},
           {"branch_distinguishability", (p1 - p2) - (q1 - q2)},
           {"overlap_parallel_perp", std::abs(overlap(par, perp))}};
    auto os = open_output(fs::path(c.out_dir) / "macrostate.json");
    os << j.dump(2) << '\n';
    mw.add_output("macrostate.json");
    mw.diagnostics["norm_deficit_parallel"] = par.norm_deficit();
    mw.diagnostics["norm_deficit_perp"] = perp.norm_deficit();
    return 0;
}

int run_micro_macro(ManifestWriter& mw) {
    const RunConfig& c = mw.config;
    const BipartiteState sigma = build_micro_macro(gain_of(c), c.phase, FockCutoff{c.cutoff});
    json weights = json::array();
    for (const auto& t : sigma.terms())
        weights.push_back({{"re", t.weight.real()}, {"im", t.weight.imag()}});
    const auto [nb1, nb2] = sigma.terms()[0].site_b.mean_photon_numbers();
    json j{{"gain", c.gain},
           {"phase", c.phase},
           {"cutoff", c.cutoff},
           {"norm2", sigma.norm2()},
           {"schmidt_weights", weights},
           {"macro_parallel_mean_photons", {nb1, nb2}},
           {"predicted_deficit", predicted_macro_deficit(gain_of(c), c.cutoff)}};
    auto os = open_output(fs::path(c.out_dir) / "micro_macro.json");
    os << j.dump(2) << '\n';
    mw.add_output("micro_macro.json");
    return 0;
}

int run_swap(ManifestWriter& mw) {
    const RunConfig& c = mw.config;
    const GainParams gain = gain_of(c);
    const FockCutoff cut{c.cutoff};
    const BellOutcome outcome = parse_outcome(c.outcome);

    const auto all = entanglement_swap_all(gain, c.phase, cut);
    json probs = json::object();
    for (const auto& r : all) probs[bell_outcome_name(r.outcome)] = r.probability;

    const SwapResult r = entanglement_swap(gain, c.phase, cut, outcome, {}, c.physical_bsm);
    const BipartiteState reference =
        gain.g == 0.0 ? micro_bell_state(outcome, c.phase, cut)
                      : macro_bell_state(gain, c.phase, cut, outcome);
    const double fid = fidelity(r.post_state, reference);

    json j{{"outcome", bell_outcome_name(outcome)},
           {"probability", r.probability},
           {"fidelity_vs_reference", fid},
           {"all_probabilities", probs},
           {"gain", c.gain},
           {"phase", c.phase},
           {"cutoff", c.cutoff},
           {"physical_bsm", c.physical_bsm}};
    auto os = open_output(fs::path(c.out_dir) / "swap.json");
    os << j.dump(2) << '\n';
    mw.add_output("swap.json");
    mw.diagnostics["post_state_norm2"] = r.post_state.norm2();
    std::cout << "swap outcome " << bell_outcome_name(outcome) << ": probability "
              << format_double(r.probability) << ", fidelity vs reference " << format_double(fid)
              << '\n';
    return 0;
}

int run_double_amp(ManifestWriter& mw) {
    const RunConfig& c = mw.config;
    const GainParams ga = gain_of(c), gb = gain_b_of(c);
    const FockCutoff cut{c.cutoff};

    const BipartiteState state = double_amplify(ga, gb, c.phase, cut);

    double fid = 0.0;
    if (ga.g == gb.g) {
        const BipartiteState direct =
            ga.g == 0.0 ? micro_bell_state(BellOutcome::PsiMinus, c.phase, cut)
                        : macro_bell_state(ga, c.phase, cut, BellOutcome::PsiMinus);
        fid = fidelity(state, direct);
    }

    std::vector<SchmidtTerm> swapped;
    for (const auto& t : state.terms()) swapped.push_back({t.weight, t.site_b, t.site_a});
    const double antisym = std::abs(overlap(state, BipartiteState(std::move(swapped))) +
                                    Complex(state.norm2(), 0.0));

    json j{{"gain", ga.g},
           {"gain_b", gb.g},
           {"unequal_gains", ga.g != gb.g},
           {"phase", c.phase},
           {"cutoff", c.cutoff},
           {"fidelity_vs_direct_construction", ga.g == gb.g ? json(fid) : json(nullptr)},
           {"antisymmetry_residual", antisym},
           {"norm2", state.norm2()}};
    auto os = open_output(fs::path(c.out_dir) / "double_amp.json");
    os << j.dump(2) << '\n';
    mw.add_output("double_amp.json");
    return 0;
}

int run_wigner(ManifestWriter& mw) {
    const RunConfig& c = mw.config;
    const GainParams gain = gain_of(c);

    SliceSpec spec;
    spec.axis1 = parse_axis(c.axis1);
    spec.axis2 = parse_axis(c.axis2);
    spec.min1 = spec.min2 = -c.range;
    spec.max1 = spec.max2 = c.range;
    spec.n1 = spec.n2 = c.nodes;
    spec.validate();

    std::optional<ModeTensor> state;
    if (c.oracle) state = amplified_injection(gain, c.injection, FockCutoff{c.cutoff});

    const WignerGrid grid = wigner_grid(gain, c.injection, spec, state ? &*state : nullptr);
    {
        auto os = open_output(fs::path(c.out_dir) / "wigner_grid.csv");
        write_wigner_csv(grid, os);
        mw.add_output("wigner_grid.csv");
    }

    const NegativityReport closed_rep = negativity_report(grid.closed, spec);
    json j{{"gain", c.gain},
           {"injection", c.injection},
           {"slice",
            {{"axis1", c.axis1},
             {"axis2", c.axis2},
             {"range", c.range},
             {"nodes", c.nodes},
             {"fixed", spec.fixed}}},
           {"cutoff", c.oracle ? json(c.cutoff) : json(nullptr)},
           {"closed_form",
            {{"min_value", closed_rep.min_value},
             {"negative_fraction", closed_rep.negative_fraction}}}};
    if (grid.oracle) {
        const NegativityReport orep = negativity_report(*grid.oracle, spec);
        j["oracle"] = {{"min_value", orep.min_value},
                       {"negative_fraction", orep.negative_fraction}};
        // side-by-side residual report: the closed form is compared against the
        // oracle, never silently corrected
        double max_abs = 0.0, sum_abs = 0.0, sum_sq = 0.0;
        for (int i = 0; i < spec.n1; ++i)
            for (int j2 = 0; j2 < spec.n2; ++j2) {
                const double d = grid.closed(i, j2) - (*grid.oracle)(i, j2);
                max_abs = std::max(max_abs, std::abs(d));
                sum_abs += std::abs(d);
                sum_sq += d * d;
            }
        const double n = double(spec.n1) * double(spec.n2);
        j["residual"] = {{"max_abs", max_abs},
                         {"mean_abs", sum_abs / n},
                         {"rms", std::sqrt(sum_sq / n)}};
    } else {
        j["oracle"] = nullptr;
        j["residual"] = nullptr;
    }
    auto os = open_output(fs::path(c.out_dir) / "wigner_grid.json");
    os << j.dump(2) << '\n';
    mw.add_output("wigner_grid.json");
    return 0;
}

int run_chsh(ManifestWriter& mw) {
    const RunConfig& c = mw.config;
    const PreparedState prep = prepare_state(c);
    const auto filt = make_filter(c);
    const OFilterConfig* fa = (filt && prep.site_a_macro) ? &*filt : nullptr;
    const OFilterConfig* fb = (filt && prep.site_b_macro) ? &*filt : nullptr;

    std::array<std::pair<double, double>, 4> settings = chsh_optimal_settings();
    if (!c.settings.empty()) {
        if (c.settings.size() != 4)
            throw ConfigError("settings: chsh needs exactly 4 [phi_a, phi_b] pairs");
        for (int k = 0; k < 4; ++k) settings[k] = {c.settings[k][0], c.settings[k][1]};
    }

    CounterRng rng(c.seed);
    const ChshResult res =
        chsh(prep.state, settings, c.samples, rng, parse_mode(c.mode), fa, fb);

    std::vector<std::array<double, 2>> phis;
    std::vector<CorrelationEstimate> es;
    for (int k = 0; k < 4; ++k) {
        phis.push_back({settings[k].first, settings[k].second});
        es.push_back(res.estimates[k]);
    }
    {
        auto os = open_output(fs::path(c.out_dir) / "chsh_correlations.csv");
        write_correlation_csv(os, phis, es);
        mw.add_output("chsh_correlations.csv");
    }

    json ests = json::array();
    for (int k = 0; k < 4; ++k) {
        json e = estimate_json(es[k]);
        e["phi_a"] = phis[k][0];
        e["phi_b"] = phis[k][1];
        ests.push_back(e);
    }
    json j{{"S", res.S},
           {"stderr", res.standard_error},
           {"violation", res.violation},
           {"estimates", ests},
           {"state", c.state_kind},
           {"gain", c.gain},
           {"cutoff", c.cutoff},
           {"samples", c.samples},
           {"seed", c.seed},
           {"mode", c.mode},
           {"filter", config_json(c)["filter"]}};
    auto os = open_output(fs::path(c.out_dir) / "chsh.json");
    os << j.dump(2) << '\n';
    mw.add_output("chsh.json");
    std::cout << "S = " << format_double(res.S) << " +- " << format_double(res.standard_error)
              << (res.violation ? "  (violates the local bound)" : "") << '\n';
    return 0;
}

int run_fringe(ManifestWriter& mw) {
    const RunConfig& c = mw.config;
    const PreparedState prep = prepare_state(c);
    const auto filt = make_filter(c);
    const OFilterConfig* fa = (filt && prep.site_a_macro) ? &*filt : nullptr;
    const OFilterConfig* fb = (filt && prep.site_b_macro) ? &*filt : nullptr;

    std::vector<double> phases;
    for (int k = 0; k < c.scan_points; ++k)
        phases.push_back(c.scan_start +
                         (c.scan_stop - c.scan_start) * k / double(c.scan_points - 1));

    const MeasurementSetting fixed{c.fixed_site == "A" ? Site::A : Site::B, c.fixed_phase};
    CounterRng rng(c.seed);
    const FringeScan scan = fringe_scan(prep.state, fixed, phases, c.samples, rng,
                                        parse_mode(c.mode), fa, fb);

    std::vector<std::array<double, 2>> phis;
    std::vector<CorrelationEstimate> es;
    for (const auto& p : scan.points) {
        if (fixed.site == Site::A) phis.push_back({c.fixed_phase, p.phase});
        else phis.push_back({p.phase, c.fixed_phase});
        es.push_back(p.estimate);
    }
    {
        auto os = open_output(fs::path(c.out_dir) / "fringe.csv");
        write_correlation_csv(os, phis, es);
        mw.add_output("fringe.csv");
    }

    json j{{"visibility", scan.visibility},
           {"state", c.state_kind},
           {"fixed_site", c.fixed_site},
           {"fixed_phase", c.fixed_phase},
           {"gain", c.gain},
           {"cutoff", c.cutoff},
           {"samples", c.samples},
           {"seed", c.seed},
           {"mode", c.mode},
           {"filter", config_json(c)["filter"]}};
    auto os = open_output(fs::path(c.out_dir) / "fringe.json");
    os << j.dump(2) << '\n';
    mw.add_output("fringe.json");
    std::cout << "fringe visibility = " << format_double(scan.visibility) << '\n';
    return 0;
}

int run_validate(ManifestWriter& mw) {
    const RunConfig& c = mw.config;
    const GainParams gain = gain_of(c);
    const double deficit = predicted_macro_deficit(gain, c.cutoff);
    const int suggested = required_cutoff(gain, 1e-6, 1);
    const bool ok = deficit < 1e-6;
    const bool desk_scale = suggested <= 4096;

    json j{{"gain", c.gain},
           {"cutoff", c.cutoff},
           {"predicted_deficit", deficit},
           {"verdict", ok ? "OK" : "INSUFFICIENT"},
           {"suggested_cutoff", suggested},
           {"desk_scale", desk_scale}};
    if (!ok && !desk_scale)
        j["note"] = "required cutoff exceeds desk-scale truncation; this gain is out of "
                    "reach for exact Fock simulation";
    auto os = open_output(fs::path(c.out_dir) / "validate.json");
    os << j.dump(2) << '\n';
    mw.add_output("validate.json");

    std::cout << "verdict: " << (ok ? "OK" : "INSUFFICIENT") << " (predicted deficit "
              << format_double(deficit) << ", suggested cutoff " << suggested << ")";
    if (!desk_scale) std::cout << " -- out of desk scale";
    std::cout << '\n';
    return 0;
}

// ------------------------------------------------------------------- main

void load_config_file(const std::string& path, RunConfig& c) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open '" + path + "'");
    json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config: parse error in '" + path + "': " + e.what());
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("gain", c.gain);
    get("gain_b", c.gain_b);
    get("phase", c.phase);
    get("cutoff", c.cutoff);
    get("injection", c.injection);
    get("samples", c.samples);
    get("seed", c.seed);
    get("mode", c.mode);
    get("out", c.out_dir);
    get("outcome", c.outcome);
    get("physical_bsm", c.physical_bsm);
    get("state", c.state_kind);
    get("oracle", c.oracle);
    get("axis1", c.axis1);
    get("axis2", c.axis2);
    get("range", c.range);
    get("nodes", c.nodes);
    get("fixed_site", c.fixed_site);
    get("fixed_phase", c.fixed_phase);
    get("scan_start", c.scan_start);
    get("scan_stop", c.scan_stop);
    get("scan_points", c.scan_points);
    if (j.contains("of_r") || j.contains("of_k") || j.contains("of_basis")) {
        c.of_enabled = true;
        get("of_r", c.of_r);
        get("of_k", c.of_k);
        get("of_basis", c.of_basis);
    }
    if (j.contains("filter") && j["filter"].is_object()) {
        c.of_enabled = true;
        const json& f = j["filter"];
        if (f.contains("of_r")) c.of_r = f["of_r"].get<double>();
        if (f.contains("of_k")) c.of_k = f["of_k"].get<int>();
        if (f.contains("of_basis")) c.of_basis = f["of_basis"].get<double>();
    }
    if (j.contains("settings")) {
        c.settings.clear();
        for (const auto& p : j["settings"])
            c.settings.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"QI-OPA macro-state simulator: parametric amplification, Wigner "
                 "functions, Macro-Macro entanglement protocols and CHSH estimation"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;

    // config file values load before the CLI parse, so explicit flags
    // override them; scan for --config up front
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                load_config_file(argv[i + 1], cfg);
            } catch (const ConfigError& e) {
                std::cerr << "error: config: " << e.what() << '\n';
                return 2;
            }
            break;
        }
    }

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags override it)");
        sub->add_option("--gain", cfg.gain, "NL gain g");
        sub->add_option("--phase", cfg.phase, "equatorial basis phase phi");
        sub->add_option("--cutoff", cfg.cutoff, "Fock cutoff per polarization mode");
        sub->add_option("--samples", cfg.samples, "Monte Carlo sample budget");
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--mode", cfg.mode, "enumerate|sample");
        sub->add_option("--of-r", cfg.of_r, "o-filter tap reflectivity")
            ->check(CLI::Range(0.0, 0.9999));
        sub->add_option("--of-k", cfg.of_k, "o-filter threshold |m-n| >= k");
        sub->add_option("--of-basis", cfg.of_basis, "o-filter counting basis phase");
        sub->add_option("--out", cfg.out_dir, "output directory");
        return sub;
    };

    CLI::App* macrostate = add_common(app.add_subcommand(
        "macrostate", "build the macro-qubit branches and dump the gamma table"));
    CLI::App* micro_macro = add_common(app.add_subcommand(
        "micro-macro", "build the Micro-Macro entangled state"));
    CLI::App* swap = add_common(app.add_subcommand(
        "swap", "entanglement swapping with a Bell measurement on the micro modes"));
    swap->add_option("--outcome", cfg.outcome, "phi-plus|phi-minus|psi-plus|psi-minus");
    swap->add_flag("--physical-bsm", cfg.physical_bsm,
                   "restrict to the beamsplitter-resolvable outcomes");
    CLI::App* double_amp = add_common(app.add_subcommand(
        "double-amp", "double amplification of one EPR pair"));
    double_amp->add_option("--gain-b", cfg.gain_b, "site-B gain (defaults to --gain)");
    CLI::App* wigner = add_common(app.add_subcommand(
        "wigner", "closed-form Wigner grid with optional displaced-parity oracle"));
    wigner->add_option("--injection", cfg.injection, "injected photons (1 or 2)");
    wigner->add_flag("--oracle", cfg.oracle, "also evaluate the displaced-parity oracle");
    wigner->add_option("--axis1", cfg.axis1, "first slice axis (a_re|a_im|b_re|b_im)");
    wigner->add_option("--axis2", cfg.axis2, "second slice axis");
    wigner->add_option("--range", cfg.range, "axis half-range");
    wigner->add_option("--nodes", cfg.nodes, "nodes per axis");
    CLI::App* chsh_cmd = add_common(app.add_subcommand(
        "chsh", "CHSH S-parameter estimation"));
    chsh_cmd->add_option("--state,--protocol", cfg.state_kind,
                         "micro-singlet|micro-macro|swap|double-amp");
    chsh_cmd->add_option("--outcome", cfg.outcome, "swap outcome when --state swap");
    chsh_cmd->add_option("--gain-b", cfg.gain_b, "second gain for double-amp source");
    CLI::App* fringe = add_common(app.add_subcommand(
        "fringe", "correlation fringe scan over one analyzer phase"));
    fringe->add_option("--state,--protocol", cfg.state_kind,
                       "micro-singlet|micro-macro|swap|double-amp");
    fringe->add_option("--fixed-site", cfg.fixed_site, "A|B");
    fringe->add_option("--fixed-phase", cfg.fixed_phase, "fixed analyzer phase");
    fringe->add_option("--scan-start", cfg.scan_start, "scan start phase");
    fringe->add_option("--scan-stop", cfg.scan_stop, "scan stop phase");
    fringe->add_option("--scan-points", cfg.scan_points, "number of scan points");
    CLI::App* validate = add_common(app.add_subcommand(
        "validate", "dry-run cutoff adequacy check (no state is built)"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* active = nullptr;
    for (CLI::App* sub : {macrostate, micro_macro, swap, double_amp, wigner, chsh_cmd,
                          fringe, validate})
        if (sub->parsed()) active = sub;
    cfg.protocol = active->get_name();

    try {
        // precedence: flags > config file > env > defaults
        if (!cfg.of_enabled) {
            cfg.of_enabled = active->count("--of-r") > 0 || active->count("--of-k") > 0 ||
                             active->count("--of-basis") > 0;
        }

        if (cfg.out_dir.empty()) {
            if (const char* env = std::getenv("QIOPA_OUT_DIR")) cfg.out_dir = env;
            else cfg.out_dir = "qiopa_out";
        }

        validate_config(cfg);

        ManifestWriter mw(cfg);
        int rc = 0;
        if (cfg.protocol == "macrostate") rc = run_macrostate(mw);
        else if (cfg.protocol == "micro-macro") rc = run_micro_macro(mw);
        else if (cfg.protocol == "swap") rc = run_swap(mw);
        else if (cfg.protocol == "double-amp") rc = run_double_amp(mw);
        else if (cfg.protocol == "wigner") rc = run_wigner(mw);
        else if (cfg.protocol == "chsh") rc = run_chsh(mw);
        else if (cfg.protocol == "fringe") rc = run_fringe(mw);
        else if (cfg.protocol == "validate") rc = run_validate(mw);
        mw.write();
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: numerical: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
