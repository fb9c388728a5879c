// spraylab command-line front end.
//
// Exit codes: 0 ok, 1 parse or configuration error, 2 sampling exhausted,
// 3 expectation mismatch (fixture diff or gen-pflat round trip).

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spraylab/spraylab.hpp"

namespace fs = std::filesystem;
using namespace spraylab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSampling = 2;
constexpr int kExitMismatch = 3;

struct Options {
    int points = 64;
    std::uint64_t seed = 7;
    int order = kDefaultOrder;
    double tol_abs = 1e-8;
    double tol_rel = 1e-6;
    double fd_step = 1e-3;
    bool fd_step_given = false;
    std::vector<std::string> consts;
    std::vector<std::string> boxes;
    std::string out;
    std::string format = "json";
};

std::pair<std::string, std::string> split_assignment(const std::string& s, const char* what) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ParamError(std::string(what) + " expects name=value, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

double to_double(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw ParamError("invalid number for " + what + ": '" + s + "'");
    return v;
}

std::vector<double> to_doubles(const std::string& list, const std::string& what) {
    std::vector<double> v;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) v.push_back(to_double(item, what));
    return v;
}

std::map<std::string, double> constants(const Options& o) {
    std::map<std::string, double> m;
    for (const auto& c : o.consts) {
        const auto [k, v] = split_assignment(c, "--const");
        m[k] = to_double(v, "--const " + k);
    }
    return m;
}

RunConfig config(const Options& o) {
    if (o.points < 1) throw ParamError("--points must be >= 1");
    if (!(o.tol_abs > 0.0) || !(o.tol_rel > 0.0)) throw ParamError("tolerances must be positive");
    if (!(o.fd_step > 0.0)) throw ParamError("--fd-step must be positive");
    RunConfig c;
    c.points = o.points;
    c.seed = o.seed;
    c.order = o.order;
    c.tol = Tolerances{o.tol_abs, o.tol_rel};
    c.fd_step = o.fd_step;
    for (const auto& b : o.boxes) {
        const auto [k, v] = split_assignment(b, "--box");
        const auto colon = v.find(':');
        if (colon == std::string::npos) throw ParamError("--box expects var=lo:hi, got '" + b + "'");
        c.box[k] = Interval{to_double(v.substr(0, colon), "--box " + k), to_double(v.substr(colon + 1), "--box " + k)};
    }
    return c;
}

void add_common(CLI::App* app, Options& o) {
    app->add_option("--points", o.points, "sample count")->capture_default_str();
    app->add_option("--seed", o.seed, "random seed (default: SPRAYLAB_SEED or 7)");
    app->add_option("--order", o.order, "jet order K")->capture_default_str();
    app->add_option("--tol-abs", o.tol_abs, "absolute tolerance")->capture_default_str();
    app->add_option("--tol-rel", o.tol_rel, "relative tolerance")->capture_default_str();
    app->add_option_function<double>(
        "--fd-step", [&o](double h) { o.fd_step = h, o.fd_step_given = true; }, "finite-difference step");
    app->add_option("--const", o.consts, "override a declared constant, name=value")->take_all();
    app->add_option("--box", o.boxes, "sampling interval, var=lo:hi")->take_all();
    app->add_option("--out", o.out, "write the report to this path");
    app->add_option("--format", o.format, "json or text")->check(CLI::IsMember({"json", "text"}))->capture_default_str();
}

/// A path, or the name of a corpus fixture ("ex7_1" also resolves to "ex7.1").
struct Input {
    fs::path path;
    std::string text;
    std::map<std::string, Interval> box;
};

Input resolve_input(const std::string& arg) {
    std::vector<fs::path> candidates{arg};
    const fs::path a(arg);
    std::string stem = a.extension() == ".spray" ? a.stem().string() : a.filename().string();
    candidates.push_back(corpus_dir() / (stem + ".spray"));
    if (stem.rfind("ex7_", 0) == 0) candidates.push_back(corpus_dir() / ("ex7." + stem.substr(4) + ".spray"));
    for (const auto& p : candidates) {
        if (!fs::is_regular_file(p)) continue;
        Input in;
        in.path = p;
        std::ifstream f(p);
        std::stringstream ss;
        ss << f.rdbuf();
        in.text = ss.str();
        if (fs::equivalent(p.parent_path(), corpus_dir())) in.box = load_fixture(p.stem().string()).box;
        return in;
    }
    throw ParamError("input not found: " + arg);
}

struct Loaded {
    std::string label;
    ProblemDef def;
    RunConfig cfg;
};

Loaded load(const std::string& arg, const Options& o) {
    const Input in = resolve_input(arg);
    Loaded l{in.path.string(), parse(in.text, constants(o), in.path.stem().string()), config(o)};
    for (const auto& [k, v] : in.box) l.cfg.box.emplace(k, v);
    return l;
}

void emit(const Options& o, const std::string& text) {
    if (o.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(o.out);
    if (!f) throw ParamError("cannot write " + o.out);
    f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string yes(bool b) { return b ? "true" : "false"; }

std::string flags_text(const ClassificationReport& r) {
    std::ostringstream s;
    s << "samples: " << r.count << " accepted, " << r.rejected << " rejected, seed " << r.seed << "\n";
    const std::pair<const char*, const Flag*> flags[] = {{"scalar", &r.scalar},         {"isotropic", &r.isotropic},
                                                        {"constant", &r.constant},     {"berwald", &r.berwald},
                                                        {"projective_form", &r.projective_form},
                                                        {"weak_isotropic", &r.weak_isotropic}};
    for (const auto& [name, f] : flags) s << "  " << name << ": " << yes(f->value) << " (residual " << f->residual << ")\n";
    s << "identities:\n";
    for (const auto& [k, v] : r.identities) s << "  " << k << ": " << v << "\n";
    for (const auto& n : r.notes) s << "note: " << n << "\n";
    return s.str();
}

std::string verdict_text(const Verdict& v, int n) {
    std::ostringstream s;
    s << "verdict: " << to_string(v.outcome) << " [" << v.rule << "]\n";
    if (!v.evidence.empty()) s << "  evidence: " << v.evidence << "\n";
    if (v.recovered_metric) {
        const auto& m = *v.recovered_metric;
        s << "  L = " << m.form;
        if (m.form == "Ric/(n-1)") s << " = Ric/" << (n - 1) << " (flag curvature 1)";
        s << "\n  recovered metric: finsler " << yes(m.finsler) << ", max|L_;i| " << m.parallel_residual << ", max|G_L - G| "
          << m.reproduction_residual << "\n";
    }
    for (const auto& [x, w] : v.omega_report) {
        s << "  omega at x = (";
        for (std::size_t i = 0; i < x.size(); ++i) s << (i ? ", " : "") << x[i];
        s << "): (";
        for (std::size_t i = 0; i < w.size(); ++i) s << (i ? ", " : "") << w[i];
        s << ")\n";
    }
    for (const auto& note : v.notes) s << "  note: " << note << "\n";
    return s.str();
}

int cmd_classify(const std::string& input, const Options& o, bool with_verdict) {
    const Loaded l = load(input, o);
    const SpraySource s(l.def);
    const auto rep = classify(s, l.cfg);
    std::optional<Verdict> v;
    if (with_verdict) v = metrize(rep, s, l.cfg);
    if (o.format == "json") {
        emit(o, dump(make_report(l.cfg, l.label, rep, v ? &*v : nullptr)));
    } else {
        std::string t = l.label + " (dim " + std::to_string(rep.dim) + ")\n" + flags_text(rep);
        if (v) t += verdict_text(*v, rep.dim);
        emit(o, t);
    }
    return kExitOk;
}

json oracle_json(const OracleComparison& c) {
    json tensors = json::array();
    for (const auto& st : c.stats)
        tensors.push_back({{"tensor", st.tensor},
                           {"components", st.components},
                           {"failures", st.failures},
                           {"worst_diff", number(st.worst_diff)},
                           {"worst_ratio", number(st.worst_ratio)},
                           {"max_magnitude", number(st.max_magnitude)}});
    return {{"points", c.points}, {"rejected", c.rejected}, {"floor", kOracleFloor}, {"rel", kOracleRel}, {"tensors", tensors}, {"ok", c.ok()}};
}

int cmd_oracle(const std::string& input, const Options& o) {
    const Loaded l = load(input, o);
    const SpraySource s(l.def);
    const double step = o.fd_step_given ? o.fd_step : default_oracle_step(s);
    const auto c = oracle_compare(s, l.cfg, step);
    if (o.format == "json") {
        json cfg = to_json(l.cfg);
        cfg["input"] = l.label;
        cfg["fd_step"] = step;
        emit(o, dump({{"config", cfg}, {"oracle", oracle_json(c)}}));
    } else {
        std::ostringstream t;
        t << l.label << ": jets vs finite differences at " << c.points << " points (step " << step << ")\n";
        t << "tensor  components  failures  worst |jet-fd|  worst ratio  max |jet|\n";
        for (const auto& st : c.stats)
            t << st.tensor << "  " << st.components << "  " << st.failures << "  " << st.worst_diff << "  " << st.worst_ratio << "  "
              << st.max_magnitude << "\n";
        t << (c.ok() ? "PASS" : "FAIL") << "\n";
        emit(o, t.str());
    }
    return kExitOk;
}

int cmd_fixture(const std::vector<std::string>& names_in, bool all, const Options& o) {
    std::vector<std::string> names = all ? fixture_names() : names_in;
    if (names.empty()) throw ParamError("fixture needs a name or --all");
    const RunConfig base = config(o);
    const auto consts = constants(o);
    json results = json::array();
    std::string text;
    bool pass = true;
    for (const auto& n : names) {
        const auto f = load_fixture(n, consts);
        const auto r = run_fixture(f, base);
        pass = pass && r.pass;
        json j = make_report(r.cfg, n, r.report, &r.verdict);
        j["fixture"] = {{"name", n}, {"pass", r.pass}, {"mismatches", r.mismatches}};
        results.push_back(std::move(j));
        text += (r.pass ? "PASS " : "FAIL ") + n + "  " + to_string(r.verdict.outcome) + " [" + r.verdict.rule + "]\n";
        for (const auto& m : r.mismatches) text += "    " + m + "\n";
    }
    emit(o, o.format == "json" ? dump(all || names.size() > 1 ? results : results.front()) : text);
    return pass ? kExitOk : kExitMismatch;
}

int cmd_shift(const std::string& input, double c, const Options& o) {
    const Loaded l = load(input, o);
    const auto r = projective_shift(l.def, c, l.cfg);
    if (o.format == "json") {
        json j = make_report(l.cfg, l.label, r.report, &r.verdict);
        j["shift"] = {{"c", r.c},
                      {"lambda", number(r.lambda)},
                      {"lambda_spread", number(r.lambda_spread)},
                      {"rbar_residual", number(r.rbar_residual)},
                      {"rule_metrizable", r.rule_metrizable},
                      {"agrees", r.agrees}};
        emit(o, dump(j));
    } else {
        std::ostringstream t;
        t << "shifted spray G + " << c << " F y of " << l.label << " (lambda = " << r.lambda << ")\n";
        t << "max |Rbar - (lambda + c^2) L| = " << r.rbar_residual << "\n";
        t << "closed-form rule: " << (r.rule_metrizable ? "metrizable" : "not metrizable") << "; engine agrees: " << yes(r.agrees) << "\n";
        t << verdict_text(r.verdict, r.report.dim);
        emit(o, t.str());
    }
    return kExitOk;
}

QuadraticData quadratic_from(const std::string& A, const std::string& B, double C, const std::string& qjson) {
    std::vector<double> a, b;
    double c = C;
    if (!qjson.empty()) {
        std::string text = qjson;
        if (text.front() != '{') {
            std::ifstream f(qjson);
            if (!f) throw ParamError("cannot read " + qjson);
            std::stringstream ss;
            ss << f.rdbuf();
            text = ss.str();
        }
        try {
            const auto j = nlohmann::json::parse(text);
            a = j.at("A").get<std::vector<double>>();
            b = j.at("B").get<std::vector<double>>();
            c = j.at("C").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ParamError(std::string("invalid quadratic data JSON: ") + e.what());
        }
    } else {
        a = to_doubles(A, "--A");
        b = to_doubles(B, "--B");
    }
    const int n = static_cast<int>(b.size());
    if (n < 2 || static_cast<int>(a.size()) != n * n) throw ParamError("A must hold n*n entries for B of length n >= 2");
    QuadraticData q{Eigen::MatrixXd(n, n), Eigen::VectorXd(n), c};
    for (int i = 0; i < n; ++i) {
        q.B(i) = b[static_cast<std::size_t>(i)];
        for (int k = 0; k < n; ++k) q.A(i, k) = a[static_cast<std::size_t>(i * n + k)];
    }
    return q;
}

int cmd_gen_pflat(const QuadraticData& q, const std::string& prefix, const Options& o) {
    const RunConfig cfg = config(o);
    const std::string spray_text = gen_spray_source(q), metric_text = gen_metric_source(q);
    const std::string spray_path = prefix + ".spray", metric_path = prefix + "_metric.spray";
    for (const auto& [path, text] : {std::pair{spray_path, spray_text}, std::pair{metric_path, metric_text}}) {
        std::ofstream f(path);
        if (!f) throw ParamError("cannot write " + path);
        f << text;
    }
    const auto adm = admissible(q, cfg);
    const SpraySource s(gen_spray(q));
    const auto rep = classify(s, cfg);
    const auto v = metrize(rep, s, cfg);
    json round = {{"admissible", adm.value}, {"admissibility_empirical", adm.empirical}, {"admissibility_margin", number(adm.margin)}};
    bool ok = true;
    if (adm.value) {
        const auto fam = family_check(q, cfg);
        const bool family = fam.spray_residual <= cfg.tol.abs + cfg.tol.rel * fam.scale && fam.ric_residual <= cfg.tol.abs;
        const bool flags = rep.berwald.value && rep.projective_form.value && rep.isotropic.value && rep.constant.value;
        ok = family && flags && v.outcome == Outcome::MetrizableWithMetric;
        round["spray_from_metric_residual"] = number(fam.spray_residual);
        round["ric_residual"] = number(fam.ric_residual);
        round["flags"] = flags;
    }
    round["ok"] = ok;
    if (o.format == "json") {
        json j = make_report(cfg, spray_path, rep, &v);
        j["files"] = {spray_path, metric_path};
        j["round_trip"] = round;
        emit(o, dump(j));
    } else {
        std::string t = "wrote " + spray_path + " and " + metric_path + "\n" + flags_text(rep) + verdict_text(v, rep.dim);
        t += "admissible: " + yes(adm.value) + (adm.empirical ? " (empirical)" : "") + "\nround trip: " + (ok ? "ok" : "FAILED") + "\n";
        emit(o, t);
    }
    return ok ? kExitOk : kExitMismatch;
}

int cmd_gen_cms(int cls, const std::string& p, const std::string& q, double param, const Options& o) {
    const CmsMetric m = gen_cms_metric(cls, p, q, param);
    std::string text = "# constant main scalar metric, class " + std::to_string(cls) + ", p = " + p + ", q = " + q;
    if (cls != 20) text += ", " + std::string(cls == 19 ? "s" : "r") + " = " + format_number(param);
    text += "\n" + to_source(m.metric);
    emit(o, text);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spraylab: curvature invariants, classification and metrizability of sprays"};
    app.require_subcommand(1);
    Options o;
    if (const char* env = std::getenv("SPRAYLAB_SEED"); env && *env) {
        try {
            o.seed = std::stoull(env);
        } catch (const std::exception&) {
            std::cerr << "error: SPRAYLAB_SEED must be a non-negative integer\n";
            return kExitConfig;
        }
    }

    std::string input;
    auto* classify_cmd = app.add_subcommand("classify", "classify a spray or metric");
    classify_cmd->add_option("input", input, "a .spray file or corpus fixture name")->required();
    add_common(classify_cmd, o);

    auto* metrize_cmd = app.add_subcommand("metrize", "classify and run the metrizability procedures");
    metrize_cmd->add_option("input", input, "a .spray file or corpus fixture name")->required();
    add_common(metrize_cmd, o);

    auto* oracle_cmd = app.add_subcommand("oracle", "compare jet tensors with finite differences");
    oracle_cmd->add_option("input", input, "a .spray file or corpus fixture name")->required();
    add_common(oracle_cmd, o);

    std::vector<std::string> fixtures;
    bool all = false;
    auto* fixture_cmd = app.add_subcommand("fixture", "run corpus fixtures against their expectations");
    fixture_cmd->add_option("names", fixtures, "fixture names");
    fixture_cmd->add_flag("--all", all, "run every fixture");
    add_common(fixture_cmd, o);

    double c = 0.0;
    auto* shift_cmd = app.add_subcommand("shift", "projective shift G + c F y of a metric of constant flag curvature");
    shift_cmd->add_option("input", input, "a metric .spray file or corpus fixture name")->required();
    shift_cmd->add_option("--c", c, "shift constant")->required();
    add_common(shift_cmd, o);

    std::string A, B, qjson, prefix = "pflat";
    double C = 0.0;
    auto* pflat_cmd = app.add_subcommand("gen-pflat", "generate the projectively flat spray and metric of (A, B, C)");
    auto* a_opt = pflat_cmd->add_option("--A", A, "row-major n x n symmetric matrix, comma separated");
    pflat_cmd->add_option("--B", B, "vector of length n, comma separated")->needs(a_opt);
    pflat_cmd->add_option("--C", C, "scalar")->needs(a_opt);
    pflat_cmd->add_option("--q", qjson, "JSON {A: [...], B: [...], C: c} inline or as a file")->excludes(a_opt);
    pflat_cmd->add_option("--prefix", prefix, "output files <prefix>.spray and <prefix>_metric.spray")->capture_default_str();
    add_common(pflat_cmd, o);

    int cls = 19;
    std::string p = "1", q = "1";
    double param = 0.0;
    auto* cms_cmd = app.add_subcommand("gen-cms", "generate a two-dimensional metric of constant main scalar");
    cms_cmd->add_option("--class", cls, "19, 20 or 21")->required();
    cms_cmd->add_option("--p", p, "coefficient p(x) of beta = p y1")->capture_default_str();
    cms_cmd->add_option("--q", q, "coefficient q(x) of gamma = q y2")->capture_default_str();
    cms_cmd->add_option("--param", param, "s for class 19, r for class 21");
    add_common(cms_cmd, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*classify_cmd) return cmd_classify(input, o, false);
        if (*metrize_cmd) return cmd_classify(input, o, true);
        if (*oracle_cmd) return cmd_oracle(input, o);
        if (*fixture_cmd) return cmd_fixture(fixtures, all, o);
        if (*shift_cmd) return cmd_shift(input, c, o);
        if (*pflat_cmd) {
            if (A.empty() && qjson.empty()) throw ParamError("gen-pflat needs --A/--B/--C or --q");
            return cmd_gen_pflat(quadratic_from(A, B, C, qjson), prefix, o);
        }
        if (*cms_cmd) return cmd_gen_cms(cls, p, q, param, o);
    } catch (const SamplingExhausted& e) {
        std::cerr << "sampling exhausted: " << e.what() << "\n";
        return kExitSampling;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
