#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "accep/caseio.hpp"

namespace accep {

using nlohmann::json;

const char* to_string(CaseError::Kind kind) {
    switch (kind) {
        case CaseError::Kind::io: return "io";
        case CaseError::Kind::parse: return "parse";
        case CaseError::Kind::schema_version: return "schema-version";
        case CaseError::Kind::unknown_key: return "unknown-key";
        case CaseError::Kind::missing_key: return "missing-key";
        case CaseError::Kind::bad_value: return "bad-value";
        case CaseError::Kind::dangling_reference: return "dangling-reference";
        case CaseError::Kind::invalid: return "invalid";
    }
    return "?";
}

namespace {

// Field access on one JSON object; remembers which keys were consumed so that
// leftovers can be reported.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw CaseError(CaseError::Kind::bad_value, where_ + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& raw(const std::string& key) {
        if (!has(key)) throw CaseError(CaseError::Kind::missing_key, where_ + ": missing key '" + key + "'");
        return j_.at(key);
    }

    double number(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number()) throw CaseError(CaseError::Kind::bad_value, where_ + "." + key + " must be a number");
        return v.get<double>();
    }

    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    std::string text(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_string()) throw CaseError(CaseError::Kind::bad_value, where_ + "." + key + " must be a string");
        return v.get<std::string>();
    }

    std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text(key) : fallback; }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw CaseError(CaseError::Kind::bad_value, where_ + "." + key + " must be a boolean");
        return v.get<bool>();
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw CaseError(CaseError::Kind::unknown_key, where_ + ": unknown key '" + key + "'");
    }

    const std::string& where() const { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

const json& array_at(Fields& f, const std::string& key) {
    const auto& v = f.raw(key);
    if (!v.is_array()) throw CaseError(CaseError::Kind::bad_value, f.where() + "." + key + " must be an array");
    return v;
}

std::vector<CapabilityLine> read_lines(const json& arr, const std::string& where) {
    std::vector<CapabilityLine> lines;
    if (!arr.is_array()) throw CaseError(CaseError::Kind::bad_value, where + " must be an array of [slope, intercept]");
    for (const auto& pair : arr) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
            throw CaseError(CaseError::Kind::bad_value, where + " entries must be [slope, intercept]");
        lines.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
    return lines;
}

CapabilityCurve read_curve(const json& j, const std::string& where) {
    Fields f(j, where);
    CapabilityCurve c;
    c.preset = CapabilityPreset::custom;
    if (f.has("upper_lines")) c.upper_lines = read_lines(f.raw("upper_lines"), where + ".upper_lines");
    if (f.has("lower_lines")) c.lower_lines = read_lines(f.raw("lower_lines"), where + ".lower_lines");
    c.q_min = f.number("q_min");
    c.q_max = f.number("q_max");
    f.finish();
    return c;
}

SourceKind parse_source_kind(const std::string& s, const std::string& where) {
    if (s == "sg") return SourceKind::sg;
    if (s == "ibr") return SourceKind::ibr;
    if (s == "storage") return SourceKind::storage;
    if (s == "compensator") return SourceKind::compensator;
    throw CaseError(CaseError::Kind::bad_value, where + ": unknown source kind '" + s + "'");
}

ConverterKind parse_converter(const std::string& s, const std::string& where) {
    if (s == "voltage-source" || s == "vsc") return ConverterKind::voltage_source;
    if (s == "line-commutating" || s == "lcc") return ConverterKind::line_commutated;
    throw CaseError(CaseError::Kind::bad_value, where + ": unknown converter kind '" + s + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    return cells;
}

double parse_double(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw CaseError(CaseError::Kind::bad_value, where + ": not a number '" + s + "'");
    return v;
}

// Raw series keyed by element id, before mapping to indices.
struct RawSeries {
    std::vector<double> duration;
    std::map<std::string, std::vector<double>> load_p, load_q, availability, inflow;
};

RawSeries read_series_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CaseError(CaseError::Kind::io, "cannot open series file " + path.string());
    RawSeries raw;
    std::string line;
    if (!std::getline(in, line)) throw CaseError(CaseError::Kind::parse, path.string() + ": empty series file");
    const auto header = split_csv_line(line);
    std::vector<std::vector<double>*> target(header.size(), nullptr);
    int duration_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto& h = header[c];
        const auto colon = h.find(':');
        const std::string prefix = h.substr(0, colon), id = colon == std::string::npos ? "" : h.substr(colon + 1);
        if (h == "snapshot") continue;
        if (h == "duration") {
            duration_col = static_cast<int>(c);
            continue;
        }
        if (prefix == "load_p") target[c] = &raw.load_p[id];
        else if (prefix == "load_q") target[c] = &raw.load_q[id];
        else if (prefix == "avail") target[c] = &raw.availability[id];
        else if (prefix == "inflow") target[c] = &raw.inflow[id];
        else throw CaseError(CaseError::Kind::unknown_key, path.string() + ": unknown column '" + h + "'");
    }
    if (duration_col < 0) throw CaseError(CaseError::Kind::missing_key, path.string() + ": missing 'duration' column");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        const std::string where = path.filename().string() + ":" + std::to_string(lineno);
        if (cells.size() != header.size())
            throw CaseError(CaseError::Kind::parse, where + ": expected " + std::to_string(header.size()) + " cells");
        raw.duration.push_back(parse_double(cells[static_cast<std::size_t>(duration_col)], where));
        for (std::size_t c = 0; c < cells.size(); ++c)
            if (target[c]) target[c]->push_back(parse_double(cells[c], where));
    }
    return raw;
}

std::vector<double> read_number_array(const json& arr, const std::string& where) {
    if (!arr.is_array()) throw CaseError(CaseError::Kind::bad_value, where + " must be an array");
    std::vector<double> out;
    for (const auto& v : arr) {
        if (!v.is_number()) throw CaseError(CaseError::Kind::bad_value, where + " must contain numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::map<std::string, std::vector<double>> read_keyed_arrays(const json& obj, const std::string& where) {
    if (!obj.is_object()) throw CaseError(CaseError::Kind::bad_value, where + " must be an object");
    std::map<std::string, std::vector<double>> out;
    for (const auto& [key, value] : obj.items()) out[key] = read_number_array(value, where + "." + key);
    return out;
}

RawSeries read_series(const json& j, const std::filesystem::path& base_dir) {
    Fields f(j, "snapshots");
    if (f.has("path")) {
        const auto p = std::filesystem::path(f.text("path"));
        f.finish();
        return read_series_csv(p.is_absolute() ? p : base_dir / p);
    }
    RawSeries raw;
    raw.duration = read_number_array(f.raw("duration"), "snapshots.duration");
    if (f.has("load_p")) raw.load_p = read_keyed_arrays(f.raw("load_p"), "snapshots.load_p");
    if (f.has("load_q")) raw.load_q = read_keyed_arrays(f.raw("load_q"), "snapshots.load_q");
    if (f.has("availability")) raw.availability = read_keyed_arrays(f.raw("availability"), "snapshots.availability");
    if (f.has("inflow")) raw.inflow = read_keyed_arrays(f.raw("inflow"), "snapshots.inflow");
    f.finish();
    return raw;
}

void fill_rows(Eigen::MatrixXd& m, const std::map<std::string, std::vector<double>>& src,
               const std::function<std::optional<std::size_t>(const std::string&)>& lookup, std::size_t T,
               const std::string& what) {
    for (const auto& [id, values] : src) {
        const auto row = lookup(id);
        if (!row) throw CaseError(CaseError::Kind::dangling_reference, what + " references unknown element '" + id + "'");
        if (values.size() != T)
            throw CaseError(CaseError::Kind::dangling_reference,
                            what + " series for '" + id + "' has length " + std::to_string(values.size()) +
                                ", expected " + std::to_string(T));
        for (std::size_t t = 0; t < T; ++t)
            m(static_cast<Eigen::Index>(*row), static_cast<Eigen::Index>(t)) = values[t];
    }
}

std::string position_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

LoadedCase parse_case(const std::string& text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw CaseError(CaseError::Kind::parse, "parse error at " + position_of(text, e.byte) + ": " + e.what());
    }
    Fields top(root, "case");
    const int version = static_cast<int>(top.number("schema_version"));
    if (version != kCaseSchemaVersion)
        throw CaseError(CaseError::Kind::schema_version, "unsupported schema_version " + std::to_string(version) +
                                                             " (expected " + std::to_string(kCaseSchemaVersion) + ")");
    LoadedCase out;
    auto& net = out.network;
    net.name = top.text("name", "case");
    net.base_mva = top.number("base_mva", 100.0);

    if (top.has("scenario")) {
        Fields f(top.raw("scenario"), "scenario");
        out.scenario.load_power_factor = f.number("load_power_factor", out.scenario.load_power_factor);
        out.scenario.hvdc_loss_per_1000km = f.number("hvdc_loss_per_1000km", out.scenario.hvdc_loss_per_1000km);
        out.scenario.attach_vsc_compensators = f.flag("attach_vsc_compensators", out.scenario.attach_vsc_compensators);
        f.finish();
    }
    if (top.has("solver")) {
        Fields f(top.raw("solver"), "solver");
        out.solver.tol = f.number("tol", out.solver.tol);
        out.solver.max_iter = static_cast<int>(f.number("max_iter", out.solver.max_iter));
        out.solver.scp_tol = f.number("scp_tol", out.solver.scp_tol);
        out.solver.scp_max_iters = static_cast<int>(f.number("scp_max_iters", out.solver.scp_max_iters));
        out.solver.tangents = static_cast<int>(f.number("tangents", out.solver.tangents));
        f.finish();
    }

    std::map<std::string, CapabilityCurve> presets = {{"d-curve", CapabilityCurve::d_curve()},
                                                      {"u-shape", CapabilityCurve::u_shape()},
                                                      {"triangle", CapabilityCurve::triangle()},
                                                      {"rectangle", CapabilityCurve::rectangle()}};
    if (top.has("capability_presets")) {
        const auto& obj = top.raw("capability_presets");
        if (!obj.is_object()) throw CaseError(CaseError::Kind::bad_value, "capability_presets must be an object");
        for (const auto& [name, value] : obj.items()) presets[name] = read_curve(value, "capability_presets." + name);
    }

    const auto& buses = array_at(top, "buses");
    for (std::size_t i = 0; i < buses.size(); ++i) {
        Fields f(buses[i], "buses[" + std::to_string(i) + "]");
        net.buses.push_back({f.text("id"), f.text("voltage_class", "")});
        f.finish();
    }
    auto bus_ref = [&](Fields& f, const std::string& key) {
        const auto id = f.text(key);
        const auto idx = net.find_bus(id);
        if (!idx) throw CaseError(CaseError::Kind::dangling_reference, f.where() + "." + key + ": unknown bus '" + id + "'");
        return *idx;
    };

    if (top.has("ac_branches")) {
        const auto& arr = array_at(top, "ac_branches");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Fields f(arr[i], "ac_branches[" + std::to_string(i) + "]");
            AcBranch b;
            b.id = f.text("id");
            b.from = bus_ref(f, "from");
            b.to = bus_ref(f, "to");
            b.r = f.number("r");
            b.x = f.number("x");
            b.b_sh = f.number("b_sh", 0.0);
            b.f_max = f.number("f_max");
            b.a = f.number("a", 1.0);
            b.theta_max = f.number("theta_max", kPi / 6.0);
            b.u_min = f.number("u_min", 1.0);
            b.u_max = f.number("u_max", b.u_min);
            b.capital_cost = f.number("capital_cost", 0.0);
            b.length_km = f.number("length_km", 0.0);
            f.finish();
            net.ac_branches.push_back(b);
        }
    }
    if (top.has("dc_branches")) {
        const auto& arr = array_at(top, "dc_branches");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Fields f(arr[i], "dc_branches[" + std::to_string(i) + "]");
            DcBranch b;
            b.id = f.text("id");
            b.from = bus_ref(f, "from");
            b.to = bus_ref(f, "to");
            b.p_max = f.number("p_max");
            b.length_km = f.number("length_km", 0.0);
            b.eta = f.has("eta") ? f.number("eta") : hvdc_loss_factor(b.length_km, out.scenario.hvdc_loss_per_1000km);
            b.converter = parse_converter(f.text("converter", "voltage-source"), f.where());
            b.u_min = f.number("u_min", 1.0);
            b.u_max = f.number("u_max", b.u_min);
            b.capital_cost = f.number("capital_cost", 0.0);
            f.finish();
            net.dc_branches.push_back(b);
        }
    }

    const auto& sources = array_at(top, "sources");
    for (std::size_t i = 0; i < sources.size(); ++i) {
        Fields f(sources[i], "sources[" + std::to_string(i) + "]");
        PowerSource s;
        s.id = f.text("id");
        s.bus = bus_ref(f, "bus");
        s.kind = parse_source_kind(f.text("kind"), f.where());
        s.carrier = f.text("carrier", to_string(s.kind));
        s.p_min = f.number("p_min", 0.0);
        s.p_max = f.number("p_max", s.kind == SourceKind::compensator ? 0.0 : 1.0);
        const auto curve_name = f.text("capability", "rectangle");
        if (curve_name.rfind("triangle:", 0) == 0) {
            s.capability = CapabilityCurve::triangle(parse_double(curve_name.substr(9), f.where() + ".capability"));
        } else {
            const auto it = presets.find(curve_name);
            if (it == presets.end())
                throw CaseError(CaseError::Kind::dangling_reference,
                                f.where() + ".capability: unknown preset '" + curve_name + "'");
            s.capability = it->second;
        }
        s.q_min = f.number("q_min", s.capability.q_min * s.p_max);
        s.q_max = f.number("q_max", s.capability.q_max * s.p_max);
        s.u_min = f.number("u_min", 0.0);
        s.u_max = f.number("u_max", s.u_min);
        s.capital_cost = f.number("capital_cost", 0.0);
        s.marginal_cost = f.number("marginal_cost", 0.0);
        s.startup_cost = f.number("startup_cost", 0.0);
        f.finish();
        net.sources.push_back(s);
    }
    if (top.has("storage")) {
        const auto& arr = array_at(top, "storage");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Fields f(arr[i], "storage[" + std::to_string(i) + "]");
            const auto id = f.text("source");
            const auto idx = net.find_source(id);
            if (!idx) throw CaseError(CaseError::Kind::dangling_reference, f.where() + ": unknown source '" + id + "'");
            StorageParams p;
            p.e_max = f.number("e_max");
            p.eta_dis = f.number("eta_dis", 1.0);
            p.eta_chg = f.number("eta_chg", 1.0);
            f.finish();
            net.sources[*idx].storage = p;
        }
    }
    for (const auto& s : net.sources)
        if (s.kind == SourceKind::storage && !s.storage)
            throw CaseError(CaseError::Kind::dangling_reference, "storage source '" + s.id + "' has no storage entry");

    const RawSeries raw = read_series(top.raw("snapshots"), base_dir);
    top.finish();

    const std::size_t T = raw.duration.size();
    const auto N = static_cast<Eigen::Index>(net.buses.size());
    auto& series = out.series;
    series.duration = raw.duration;
    series.load_p = Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(T));
    auto bus_lookup = [&](const std::string& id) { return net.find_bus(id); };
    fill_rows(series.load_p, raw.load_p, bus_lookup, T, "load_p");
    series.load_q = derive_reactive_loads(series.load_p, out.scenario.load_power_factor);
    fill_rows(series.load_q, raw.load_q, bus_lookup, T, "load_q");

    if (out.scenario.attach_vsc_compensators) net = attach_vsc_compensators(net);
    const auto S = static_cast<Eigen::Index>(net.sources.size());
    series.availability = Eigen::MatrixXd::Ones(S, static_cast<Eigen::Index>(T));
    series.inflow_max = Eigen::MatrixXd::Zero(S, static_cast<Eigen::Index>(T));
    auto source_lookup = [&](const std::string& id) { return net.find_source(id); };
    fill_rows(series.availability, raw.availability, source_lookup, T, "availability");
    fill_rows(series.inflow_max, raw.inflow, source_lookup, T, "inflow");

    const auto violations = validate_case(net, series);
    if (!violations.empty()) {
        std::string msg = "case '" + net.name + "' is invalid:";
        for (const auto& v : violations) msg += "\n  " + v.element + ": " + v.message;
        throw CaseError(CaseError::Kind::invalid, msg);
    }
    return out;
}

LoadedCase load_case(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CaseError(CaseError::Kind::io, "cannot open case file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_case(buffer.str(), path.parent_path());
}

}  // namespace accep
