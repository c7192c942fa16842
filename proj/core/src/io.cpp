#include "mbgw/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

namespace mbgw::io {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ValidationError(path + ": " + msg); }

void only_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) fail(path, "expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) fail(path, "unknown key \"" + k + "\"");
}

const json& need(const json& j, const std::string& path, const std::string& key) {
    auto it = j.find(key);
    if (it == j.end()) fail(path, "missing key \"" + key + "\"");
    return *it;
}

double finite_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "not finite");
    return v;
}

int nonneg_int(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<long>() < 0) fail(path, "expected a non-negative integer");
    return j.get<int>();
}

}  // namespace

Rational parse_rational(const std::string& s) {
    static const std::regex frac(R"(\s*(\d+)\s*/\s*(\d+)\s*)");
    static const std::regex dec(R"(\s*\+?(\d*)(?:\.(\d*))?(?:[eE]([+-]?\d+))?\s*)");
    std::smatch m;
    if (std::regex_match(s, m, frac)) {
        auto strip = [](std::string x) { return x.erase(0, std::min(x.find_first_not_of('0'), x.size() - 1)); };
        BigInt num(strip(m[1].str())), den(strip(m[2].str()));
        if (den == 0) throw ValidationError("zero denominator in \"" + s + "\"");
        return Rational(num, den);
    }
    if (std::regex_match(s, m, dec) && (m[1].length() + m[2].length()) > 0) {
        std::string digits = m[1].str() + m[2].str();
        digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size()));  // no octal reading
        long exp10 = -static_cast<long>(m[2].length());
        if (m[3].matched) exp10 += std::stol(m[3].str());
        if (std::abs(exp10) > 400) throw ValidationError("exponent out of range in \"" + s + "\"");
        BigInt num(digits.empty() ? "0" : digits);
        BigInt scale = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::abs(exp10)));
        return exp10 >= 0 ? Rational(num * scale) : Rational(num, scale);
    }
    throw ValidationError("not a non-negative decimal or fraction: \"" + s + "\"");
}

ModelSpec parse_model(const json& j) {
    only_keys(j, "model", {"d", "alpha", "offspring", "xi"});
    ModelSpec spec;
    spec.d = nonneg_int(need(j, "model", "d"), "model.d");
    if (spec.d < 1) fail("model.d", "must be >= 1");
    const json& alpha = need(j, "model", "alpha");
    if (!alpha.is_array() || static_cast<int>(alpha.size()) != spec.d) fail("model.alpha", "expected d numbers");
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        std::string p = "model.alpha[" + std::to_string(m) + "]";
        double a = finite_number(alpha[m], p);
        if (!(a > 0.0)) fail(p, "must be positive");
        spec.alpha.push_back(a);
    }
    const json& off = need(j, "model", "offspring");
    if (!off.is_array() || static_cast<int>(off.size()) != spec.d) fail("model.offspring", "expected d laws");
    for (std::size_t m = 0; m < off.size(); ++m) {
        std::string lp = "model.offspring[" + std::to_string(m) + "]";
        if (!off[m].is_array() || off[m].empty()) fail(lp, "expected a non-empty array of atoms");
        OffspringLaw law;
        Rational exact_sum(0);
        bool all_exact = true;
        for (std::size_t q = 0; q < off[m].size(); ++q) {
            std::string ap = lp + "[" + std::to_string(q) + "]";
            const json& at = off[m][q];
            only_keys(at, ap, {"counts", "p"});
            Atom a;
            const json& c = need(at, ap, "counts");
            if (!c.is_array() || static_cast<int>(c.size()) != spec.d) fail(ap + ".counts", "expected d integers");
            for (std::size_t x = 0; x < c.size(); ++x)
                a.counts.push_back(nonneg_int(c[x], ap + ".counts[" + std::to_string(x) + "]"));
            const json& p = need(at, ap, "p");
            if (p.is_string()) {
                Rational r;
                try {
                    r = parse_rational(p.get<std::string>());
                } catch (const ValidationError& e) {
                    fail(ap + ".p", e.what());
                }
                if (r > 1) fail(ap + ".p", "probability above 1");
                exact_sum += r;
                a.p = r.convert_to<double>();
            } else {
                all_exact = false;
                a.p = finite_number(p, ap + ".p");
                if (a.p < 0.0 || a.p > 1.0) fail(ap + ".p", "probability outside [0,1]");
            }
            law.atoms.push_back(std::move(a));
        }
        if (all_exact && exact_sum != 1) fail(lp, "probabilities sum to " + exact_sum.str() + ", not 1");
        spec.offspring.push_back(std::move(law));
    }
    auto xi = j.find("xi");
    if (xi == j.end() || (xi->is_string() && xi->get<std::string>() == "perron")) {
        spec.xi_perron = true;
    } else {
        if (!xi->is_array() || static_cast<int>(xi->size()) != spec.d)
            fail("model.xi", "expected d positive numbers or \"perron\"");
        double sum = 0.0;
        for (std::size_t m = 0; m < xi->size(); ++m) {
            std::string p = "model.xi[" + std::to_string(m) + "]";
            double x = finite_number((*xi)[m], p);
            if (!(x > 0.0)) fail(p, "must be positive");
            spec.xi.push_back(x);
            sum += x;
        }
        for (double& x : spec.xi) x /= sum;
    }
    if (spec.xi_perron) {
        spec.xi.assign(spec.d, 1.0 / spec.d);  // placeholder so the structural check can run
        spec.check_structure();
        resolve_xi(spec);
    }
    spec.check_structure();
    return spec;
}

ModelSpec load_model(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return parse_model(j);
}

json model_to_json(const ModelSpec& spec) {
    json off = json::array();
    for (const auto& law : spec.offspring) {
        json atoms = json::array();
        for (const auto& a : law.atoms) atoms.push_back({{"counts", a.counts}, {"p", a.p}});
        off.push_back(atoms);
    }
    json j{{"d", spec.d}, {"alpha", spec.alpha}, {"offspring", off}};
    if (spec.xi_perron)
        j["xi"] = "perron";
    else
        j["xi"] = spec.xi;
    return j;
}

// ------------------------------------------------------------------ logs

namespace {

json log_header(const EventLog& log) {
    return {{"spec_hash", log.spec_hash}, {"T", log.T}, {"seed", log.seed}, {"root_type", log.root_type + 1}, {"d", log.d}};
}

json event_json(const EventLog& log, const Event& e) {
    return {{"t", e.t}, {"parent", log.label(e.parent).str()}, {"ptype", e.ptype + 1}, {"counts", e.counts}};
}

}  // namespace

std::string event_log_jsonl(const EventLog& log) {
    std::string out = log_header(log).dump() + "\n";
    for (const auto& e : log.events) out += event_json(log, e).dump() + "\n";
    return out;
}

std::string marked_run_jsonl(const MarkedRun& run) {
    json h = log_header(run.log);
    h["k"] = run.k;
    std::string out = h.dump() + "\n";
    std::vector<const MarkMove*> by_event(run.log.events.size(), nullptr);
    for (const auto& mv : run.moves) by_event.at(mv.event) = &mv;
    for (std::size_t q = 0; q < run.log.events.size(); ++q) {
        json e = event_json(run.log, run.log.events[q]);
        if (by_event[q]) {
            json marks = json::object();
            for (auto [mark, child] : by_event[q]->moves) marks[std::to_string(mark)] = "child " + std::to_string(child);
            e["marks"] = marks;
        }
        out += e.dump() + "\n";
    }
    return out;
}

EventLog parse_event_log_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    EventLog log;
    bool header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::string where = "line " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            fail(where, e.what());
        }
        if (!header) {
            log.spec_hash = need(j, where, "spec_hash").get<std::string>();
            log.T = finite_number(need(j, where, "T"), where + ".T");
            log.seed = need(j, where, "seed").get<std::uint64_t>();
            log.root_type = nonneg_int(need(j, where, "root_type"), where + ".root_type") - 1;
            if (log.root_type < 0) fail(where, "root_type is 1-based");
            if (j.contains("d")) log.d = nonneg_int(j["d"], where + ".d");
            Node root;
            root.type = log.root_type;
            log.nodes.push_back(root);
            header = true;
            continue;
        }
        int parent = log.find(UlamHarrisLabel::parse(need(j, where, "parent").get<std::string>()));
        if (parent < 0) fail(where, "unknown parent label");
        double t = finite_number(need(j, where, "t"), where + ".t");
        Counts c = need(j, where, "counts").get<Counts>();
        log.add_event(t, parent, c);
    }
    if (!header) throw ValidationError("event log has no header");
    return log;
}

// ------------------------------------------------------------------ genealogy

json partition_to_json(const ColouredPartition& P) { return P.text(); }

json path_to_json(const AncestralPath& path) {
    json br = json::array();
    for (const auto& b : path.breaks)
        br.push_back({{"t", b.t},
                      {"kind", to_string(b.kind)},
                      {"partition", b.value.text()},
                      {"parent_block", b.parent_block}});
    return {{"k", path.k}, {"T", path.T}, {"initial", path.initial.text()}, {"breakpoints", br}};
}

json record_to_json(const SplitRecord& rec) {
    json sp = json::array();
    for (const auto& s : rec.splits)
        sp.push_back({{"t", s.t},
                      {"parent_type", s.parent_type + 1},
                      {"l", s.l},
                      {"P", s.P.text()},
                      {"parent_block", s.parent_block}});
    return {{"k", rec.k}, {"root_type", rec.root_type + 1}, {"T", rec.T}, {"splits", sp}};
}

SplitRecord record_from_json(const json& j, int d) {
    only_keys(j, "record", {"k", "root_type", "T", "splits"});
    SplitRecord rec;
    rec.k = nonneg_int(need(j, "record", "k"), "record.k");
    rec.root_type = nonneg_int(need(j, "record", "root_type"), "record.root_type") - 1;
    rec.T = finite_number(need(j, "record", "T"), "record.T");
    const json& sp = need(j, "record", "splits");
    if (!sp.is_array()) fail("record.splits", "expected an array");
    for (std::size_t h = 0; h < sp.size(); ++h) {
        std::string p = "record.splits[" + std::to_string(h) + "]";
        only_keys(sp[h], p, {"t", "parent_type", "l", "P", "parent_block"});
        SplitEvent e;
        e.t = finite_number(need(sp[h], p, "t"), p + ".t");
        e.parent_type = nonneg_int(need(sp[h], p, "parent_type"), p + ".parent_type") - 1;
        const json& l = need(sp[h], p, "l");
        if (!l.is_array()) fail(p + ".l", "expected d integers");
        for (std::size_t x = 0; x < l.size(); ++x) e.l.push_back(nonneg_int(l[x], p + ".l[" + std::to_string(x) + "]"));
        e.P = ColouredPartition::parse(need(sp[h], p, "P").get<std::string>());
        if (sp[h].contains("parent_block"))
            e.parent_block = sp[h]["parent_block"].get<std::vector<int>>();
        else
            e.parent_block = e.P.members();
        rec.splits.push_back(std::move(e));
    }
    rec.check(d, false);
    return rec;
}

// ------------------------------------------------------------------ reports

json result_to_json(const CriterionResult& r) {
    json m = json::object();
    for (const auto& [k, v] : r.metrics) m[k] = v;
    return {{"id", r.id}, {"title", r.title}, {"pass", r.pass}, {"summary", r.summary}, {"seconds", r.seconds},
            {"metrics", m}};
}

std::string results_csv(const std::vector<CriterionResult>& rs) {
    std::ostringstream o;
    o << "id,pass,seconds,metric,value\n";
    for (const auto& r : rs) {
        if (r.metrics.empty()) o << r.id << ',' << (r.pass ? "pass" : "fail") << ',' << std::fixed
                                 << std::setprecision(1) << r.seconds << ",,\n";
        for (const auto& [k, v] : r.metrics) {
            o << r.id << ',' << (r.pass ? "pass" : "fail") << ',' << std::fixed << std::setprecision(1) << r.seconds
              << ",\"" << k << "\",";
            o << std::defaultfloat << std::setprecision(6) << v << '\n';
        }
    }
    return o.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace mbgw::io
