#include "accep/results.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace accep {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void fit(Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, double fill = 0.0) {
    if (m.rows() != rows || m.cols() != cols) m = Eigen::MatrixXd::Constant(rows, cols, fill);
}

void fit(Eigen::VectorXd& v, Eigen::Index n) {
    if (v.size() != n) v = Eigen::VectorXd::Zero(n);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw ResultsError("cannot write " + p.string());
    return out;
}

struct Table {
    std::unordered_map<std::string, std::size_t> column;
    std::vector<std::vector<std::string>> rows;
    fs::path path;

    const std::string& at(const std::vector<std::string>& row, const std::string& name) const {
        auto it = column.find(name);
        if (it == column.end()) throw ResultsError(path.string() + ": missing column " + name);
        return row[it->second];
    }
    double number(const std::vector<std::string>& row, const std::string& name) const {
        const auto& s = at(row, name);
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || *end != '\0') throw ResultsError(path.string() + ": bad number '" + s + "' in " + name);
        return v;
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

Table read_table(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ResultsError("cannot read " + p.string());
    Table t;
    t.path = p;
    std::string line;
    if (!std::getline(in, line)) throw ResultsError(p.string() + ": empty file");
    const auto header = split(line);
    for (std::size_t i = 0; i < header.size(); ++i) t.column[header[i]] = i;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = split(line);
        if (row.size() != header.size()) throw ResultsError(p.string() + ": ragged row '" + line + "'");
        t.rows.push_back(std::move(row));
    }
    return t;
}

template <class Items>
std::unordered_map<std::string, std::size_t> index_of(const Items& items) {
    std::unordered_map<std::string, std::size_t> m;
    for (std::size_t i = 0; i < items.size(); ++i) m[items[i].id] = i;
    return m;
}

std::size_t lookup(const std::unordered_map<std::string, std::size_t>& m, const std::string& id, const fs::path& p) {
    auto it = m.find(id);
    if (it == m.end()) throw ResultsError(p.string() + ": unknown element " + id);
    return it->second;
}

Eigen::Index snapshot_of(const Table& t, const std::vector<std::string>& row, std::size_t T) {
    const double s = t.number(row, "snapshot");
    if (s < 0 || s >= static_cast<double>(T)) throw ResultsError(t.path.string() + ": snapshot out of range");
    return static_cast<Eigen::Index>(s);
}

json report_json(const NlpReport& r) {
    return {{"status", to_string(r.status)},
            {"feasibility", r.feasibility},
            {"stationarity", r.stationarity},
            {"complementarity", r.complementarity},
            {"objective", r.objective},
            {"iterations", r.iterations},
            {"start", r.start},
            {"certification_residual", r.certification_residual},
            {"message", r.message}};
}

NlpReport report_from(const json& j) {
    NlpReport r;
    const auto s = j.at("status").get<std::string>();
    if (s == to_string(NlpStatus::feasible_optimal)) r.status = NlpStatus::feasible_optimal;
    else if (s == to_string(NlpStatus::locally_infeasible)) r.status = NlpStatus::locally_infeasible;
    else if (s == to_string(NlpStatus::iteration_limit)) r.status = NlpStatus::iteration_limit;
    else throw ResultsError("unknown solver status " + s);
    r.feasibility = j.at("feasibility");
    r.stationarity = j.at("stationarity");
    r.complementarity = j.at("complementarity");
    r.objective = j.at("objective");
    r.iterations = j.at("iterations");
    r.start = j.at("start");
    r.certification_residual = j.at("certification_residual");
    r.message = j.at("message");
    return r;
}

json by_source(const NetworkCase& net, const Eigen::VectorXd& v) {
    json j = json::object();
    for (std::size_t s = 0; s < net.sources.size(); ++s) j[net.sources[s].id] = v[static_cast<Eigen::Index>(s)];
    return j;
}

Eigen::VectorXd source_vector(const NetworkCase& net, const json& j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.sources.size()));
    const auto idx = index_of(net.sources);
    for (const auto& [id, val] : j.items()) v[static_cast<Eigen::Index>(lookup(idx, id, "reinforcement_log.json"))] = val;
    return v;
}

json by_source(const NetworkCase& net, const Eigen::MatrixXd& m) {
    json j = json::object();
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        json row = json::array();
        for (Eigen::Index t = 0; t < m.cols(); ++t) row.push_back(m(static_cast<Eigen::Index>(s), t));
        j[net.sources[s].id] = row;
    }
    return j;
}

Eigen::MatrixXd source_matrix(const NetworkCase& net, const json& j, std::size_t T) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(net.sources.size()), static_cast<Eigen::Index>(T));
    const auto idx = index_of(net.sources);
    for (const auto& [id, row] : j.items()) {
        const auto s = static_cast<Eigen::Index>(lookup(idx, id, "reinforcement_log.json"));
        if (row.size() != T) throw ResultsError("reinforcement_log.json: row length mismatch for " + id);
        for (std::size_t t = 0; t < T; ++t) m(s, static_cast<Eigen::Index>(t)) = row[t];
    }
    return m;
}

}  // namespace

PlanSolution canonical_plan(const PlanSolution& plan, const NetworkCase& net, std::size_t snapshots) {
    PlanSolution c = plan;
    const auto S = static_cast<Eigen::Index>(net.sources.size());
    const auto N = static_cast<Eigen::Index>(net.buses.size());
    const auto L = static_cast<Eigen::Index>(net.ac_branches.size());
    const auto D = static_cast<Eigen::Index>(net.dc_branches.size());
    const auto T = static_cast<Eigen::Index>(snapshots);
    fit(c.u_source, S);
    fit(c.u_ac, L);
    fit(c.u_dc, D);
    fit(c.parameter_circuits, L);
    for (auto* m : {&c.p, &c.q, &c.beta, &c.beta_su, &c.beta_sd, &c.p_charge, &c.p_inflow, &c.energy}) fit(*m, S, T);
    for (auto* m : {&c.p_from, &c.p_to, &c.q_from, &c.q_to, &c.p_loss, &c.q_dem, &c.cos_relax}) fit(*m, L, T);
    for (auto* m : {&c.dc_from, &c.dc_to, &c.dc_fwd, &c.dc_bwd}) fit(*m, D, T);
    fit(c.v, N, T, 1.0);
    for (auto* m : {&c.theta, &c.price}) fit(*m, N, T);
    return c;
}

void write_results(const fs::path& dir, const NetworkCase& net, const ResultBundle& bundle) {
    const std::size_t T = static_cast<std::size_t>(bundle.plan.p.cols());
    const PlanSolution plan = canonical_plan(bundle.plan, net, T);
    fs::create_directories(dir);
    const auto Ti = static_cast<Eigen::Index>(T);

    {
        auto out = open_out(dir / "plan.csv");
        out << "type,id,u,u_min,u_max,parameter_circuits\n";
        for (std::size_t s = 0; s < net.sources.size(); ++s) {
            const auto& e = net.sources[s];
            out << "source," << e.id << "," << num(plan.u_source[static_cast<Eigen::Index>(s)]) << "," << num(e.u_min)
                << "," << num(e.u_max) << ",\n";
        }
        for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
            const auto& e = net.ac_branches[l];
            const auto li = static_cast<Eigen::Index>(l);
            out << "ac," << e.id << "," << num(plan.u_ac[li]) << "," << num(e.u_min) << "," << num(e.u_max) << ","
                << num(plan.parameter_circuits[li]) << "\n";
        }
        for (std::size_t l = 0; l < net.dc_branches.size(); ++l) {
            const auto& e = net.dc_branches[l];
            out << "dc," << e.id << "," << num(plan.u_dc[static_cast<Eigen::Index>(l)]) << "," << num(e.u_min) << ","
                << num(e.u_max) << ",\n";
        }
    }
    {
        auto out = open_out(dir / "dispatch.csv");
        out << "source,snapshot,p,q,beta,beta_su,beta_sd,p_charge,p_inflow,energy\n";
        for (Eigen::Index t = 0; t < Ti; ++t)
            for (std::size_t s = 0; s < net.sources.size(); ++s) {
                const auto i = static_cast<Eigen::Index>(s);
                out << net.sources[s].id << "," << t;
                for (const auto* m : {&plan.p, &plan.q, &plan.beta, &plan.beta_su, &plan.beta_sd, &plan.p_charge,
                                      &plan.p_inflow, &plan.energy})
                    out << "," << num((*m)(i, t));
                out << "\n";
            }
    }
    {
        auto out = open_out(dir / "flows.csv");
        out << "type,branch,snapshot,p_from,q_from,p_to,q_to,p_loss,q_dem,cos_relax,fwd,bwd\n";
        for (Eigen::Index t = 0; t < Ti; ++t) {
            for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
                const auto i = static_cast<Eigen::Index>(l);
                out << "ac," << net.ac_branches[l].id << "," << t;
                for (const auto* m : {&plan.p_from, &plan.q_from, &plan.p_to, &plan.q_to, &plan.p_loss, &plan.q_dem,
                                      &plan.cos_relax})
                    out << "," << num((*m)(i, t));
                out << ",,\n";
            }
            for (std::size_t l = 0; l < net.dc_branches.size(); ++l) {
                const auto i = static_cast<Eigen::Index>(l);
                out << "dc," << net.dc_branches[l].id << "," << t << "," << num(plan.dc_from(i, t)) << ",,"
                    << num(plan.dc_to(i, t)) << ",,,,," << num(plan.dc_fwd(i, t)) << "," << num(plan.dc_bwd(i, t))
                    << "\n";
            }
        }
    }
    {
        auto out = open_out(dir / "buses.csv");
        out << "bus,snapshot,v,theta,price\n";
        for (Eigen::Index t = 0; t < Ti; ++t)
            for (std::size_t b = 0; b < net.buses.size(); ++b) {
                const auto i = static_cast<Eigen::Index>(b);
                out << net.buses[b].id << "," << t << "," << num(plan.v(i, t)) << "," << num(plan.theta(i, t)) << ","
                    << num(plan.price(i, t)) << "\n";
            }
    }
    {
        json j;
        j["kind"] = to_string(plan.kind);
        j["snapshots"] = T;
        j["objective"] = plan.objective;
        j["cost"] = {{"capital_sources", plan.cost.capital_sources}, {"capital_ac", plan.cost.capital_ac},
                     {"capital_dc", plan.cost.capital_dc},           {"operation", plan.cost.operation},
                     {"startup", plan.cost.startup},                 {"shutdown", plan.cost.shutdown}};
        j["iterations"] = plan.iterations;
        j["converged"] = plan.converged;
        j["delta_history"] = plan.delta_history;
        j["case"] = bundle.case_path;
        j["initial"] = bundle.initial_dir;
        auto out = open_out(dir / "objective.json");
        out << j.dump(2) << "\n";
    }
    {
        auto out = open_out(dir / "loss_audit.csv");
        out << "branch,snapshot,theta,model,bound,slack,fictitious,below_bound\n";
        if (bundle.loss_audit)
            for (const auto& r : bundle.loss_audit->records)
                out << r.branch << "," << r.snapshot << "," << num(r.theta) << "," << num(r.model) << ","
                    << num(r.bound) << "," << num(r.slack) << "," << (r.fictitious ? 1 : 0) << ","
                    << (r.below_bound ? 1 : 0) << "\n";
    }
    {
        json j = json::object();
        if (bundle.log) {
            const auto& log = *bundle.log;
            j["failing"] = log.failing;
            j["records"] = json::array();
            for (const auto& r : log.records) {
                json e = {{"snapshot", r.snapshot},
                          {"outcome", to_string(r.outcome)},
                          {"opf", report_json(r.opf)},
                          {"increments", by_source(net, r.increments)}};
                e["gep"] = r.gep ? report_json(*r.gep) : json(nullptr);
                j["records"].push_back(e);
            }
            j["cumulative_increments"] = by_source(net, log.cumulative_increments);
            j["redispatch_positive"] = by_source(net, log.redispatch_positive);
            j["redispatch_negative"] = by_source(net, log.redispatch_negative);
            j["shutdown"] = by_source(net, log.shutdown);
            j["certification_residual"] = log.certification_residual;
            j["certified"] = log.certified;
        }
        auto out = open_out(dir / "reinforcement_log.json");
        out << j.dump(2) << "\n";
    }
}

ResultBundle read_results(const fs::path& dir, const NetworkCase& net) {
    ResultBundle bundle;
    json obj;
    {
        std::ifstream in(dir / "objective.json");
        if (!in) throw ResultsError("cannot read " + (dir / "objective.json").string());
        try {
            obj = json::parse(in);
        } catch (const json::exception& e) {
            throw ResultsError("objective.json: " + std::string(e.what()));
        }
    }
    const std::size_t T = obj.at("snapshots");
    const auto Ti = static_cast<Eigen::Index>(T);
    PlanSolution plan;
    const auto kind = parse_formulation_kind(obj.at("kind").get<std::string>());
    if (!kind) throw ResultsError("objective.json: unknown kind");
    plan.kind = *kind;
    plan.objective = obj.at("objective");
    const auto& c = obj.at("cost");
    plan.cost.capital_sources = c.at("capital_sources");
    plan.cost.capital_ac = c.at("capital_ac");
    plan.cost.capital_dc = c.at("capital_dc");
    plan.cost.operation = c.at("operation");
    plan.cost.startup = c.at("startup");
    plan.cost.shutdown = c.at("shutdown");
    plan.iterations = obj.at("iterations");
    plan.converged = obj.at("converged");
    plan.delta_history = obj.at("delta_history").get<std::vector<double>>();
    bundle.case_path = obj.value("case", "");
    bundle.initial_dir = obj.value("initial", "");
    plan.p.resize(0, Ti);
    plan = canonical_plan(plan, net, T);

    const auto src_idx = index_of(net.sources);
    const auto ac_idx = index_of(net.ac_branches);
    const auto dc_idx = index_of(net.dc_branches);
    const auto bus_idx = index_of(net.buses);

    {
        const auto t = read_table(dir / "plan.csv");
        for (const auto& row : t.rows) {
            const auto& type = t.at(row, "type");
            const auto& id = t.at(row, "id");
            if (type == "source") {
                plan.u_source[static_cast<Eigen::Index>(lookup(src_idx, id, t.path))] = t.number(row, "u");
            } else if (type == "ac") {
                const auto l = static_cast<Eigen::Index>(lookup(ac_idx, id, t.path));
                plan.u_ac[l] = t.number(row, "u");
                plan.parameter_circuits[l] = t.number(row, "parameter_circuits");
            } else if (type == "dc") {
                plan.u_dc[static_cast<Eigen::Index>(lookup(dc_idx, id, t.path))] = t.number(row, "u");
            } else {
                throw ResultsError(t.path.string() + ": unknown element type " + type);
            }
        }
    }
    {
        const auto t = read_table(dir / "dispatch.csv");
        const std::pair<const char*, Eigen::MatrixXd*> cols[] = {
            {"p", &plan.p},           {"q", &plan.q},         {"beta", &plan.beta},
            {"beta_su", &plan.beta_su}, {"beta_sd", &plan.beta_sd}, {"p_charge", &plan.p_charge},
            {"p_inflow", &plan.p_inflow}, {"energy", &plan.energy}};
        for (const auto& row : t.rows) {
            const auto s = static_cast<Eigen::Index>(lookup(src_idx, t.at(row, "source"), t.path));
            const auto k = snapshot_of(t, row, T);
            for (const auto& [name, m] : cols) (*m)(s, k) = t.number(row, name);
        }
    }
    {
        const auto t = read_table(dir / "flows.csv");
        const std::pair<const char*, Eigen::MatrixXd*> ac_cols[] = {
            {"p_from", &plan.p_from}, {"q_from", &plan.q_from}, {"p_to", &plan.p_to},        {"q_to", &plan.q_to},
            {"p_loss", &plan.p_loss}, {"q_dem", &plan.q_dem},   {"cos_relax", &plan.cos_relax}};
        for (const auto& row : t.rows) {
            const auto& type = t.at(row, "type");
            const auto k = snapshot_of(t, row, T);
            if (type == "ac") {
                const auto l = static_cast<Eigen::Index>(lookup(ac_idx, t.at(row, "branch"), t.path));
                for (const auto& [name, m] : ac_cols) (*m)(l, k) = t.number(row, name);
            } else if (type == "dc") {
                const auto l = static_cast<Eigen::Index>(lookup(dc_idx, t.at(row, "branch"), t.path));
                plan.dc_from(l, k) = t.number(row, "p_from");
                plan.dc_to(l, k) = t.number(row, "p_to");
                plan.dc_fwd(l, k) = t.number(row, "fwd");
                plan.dc_bwd(l, k) = t.number(row, "bwd");
            } else {
                throw ResultsError(t.path.string() + ": unknown branch type " + type);
            }
        }
    }
    {
        const auto t = read_table(dir / "buses.csv");
        for (const auto& row : t.rows) {
            const auto b = static_cast<Eigen::Index>(lookup(bus_idx, t.at(row, "bus"), t.path));
            const auto k = snapshot_of(t, row, T);
            plan.v(b, k) = t.number(row, "v");
            plan.theta(b, k) = t.number(row, "theta");
            plan.price(b, k) = t.number(row, "price");
        }
    }
    {
        const auto t = read_table(dir / "loss_audit.csv");
        if (!t.rows.empty()) {
            LossAudit a;
            a.kind = plan.kind;
            a.min_slack = std::numeric_limits<double>::infinity();
            a.max_slack = -std::numeric_limits<double>::infinity();
            for (const auto& row : t.rows) {
                LossRecord r;
                r.branch = t.at(row, "branch");
                r.branch_index = lookup(ac_idx, r.branch, t.path);
                r.snapshot = static_cast<std::size_t>(snapshot_of(t, row, T));
                r.theta = t.number(row, "theta");
                r.model = t.number(row, "model");
                r.bound = t.number(row, "bound");
                r.slack = t.number(row, "slack");
                r.fictitious = t.number(row, "fictitious") != 0.0;
                r.below_bound = t.number(row, "below_bound") != 0.0;
                a.total_model += r.model;
                a.total_bound += r.bound;
                a.min_slack = std::min(a.min_slack, r.slack);
                a.max_slack = std::max(a.max_slack, r.slack);
                if (r.fictitious) ++a.fictitious_count;
                a.records.push_back(r);
            }
            bundle.loss_audit = std::move(a);
        }
    }
    {
        std::ifstream in(dir / "reinforcement_log.json");
        if (!in) throw ResultsError("cannot read " + (dir / "reinforcement_log.json").string());
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ResultsError("reinforcement_log.json: " + std::string(e.what()));
        }
        if (!j.empty()) {
            ReinforcementLog log;
            log.failing = j.at("failing").get<std::vector<std::size_t>>();
            for (const auto& e : j.at("records")) {
                SnapshotRecord r;
                r.snapshot = e.at("snapshot");
                const auto o = e.at("outcome").get<std::string>();
                if (o == to_string(SnapshotOutcome::opf_feasible)) r.outcome = SnapshotOutcome::opf_feasible;
                else if (o == to_string(SnapshotOutcome::gep_reinforced)) r.outcome = SnapshotOutcome::gep_reinforced;
                else throw ResultsError("reinforcement_log.json: unknown outcome " + o);
                r.opf = report_from(e.at("opf"));
                if (!e.at("gep").is_null()) r.gep = report_from(e.at("gep"));
                r.increments = source_vector(net, e.at("increments"));
                log.records.push_back(std::move(r));
            }
            log.cumulative_increments = source_vector(net, j.at("cumulative_increments"));
            log.redispatch_positive = source_matrix(net, j.at("redispatch_positive"), T);
            log.redispatch_negative = source_matrix(net, j.at("redispatch_negative"), T);
            log.shutdown = source_matrix(net, j.at("shutdown"), T);
            log.certification_residual = j.at("certification_residual").get<std::vector<double>>();
            log.certified = j.at("certified").get<std::vector<bool>>();
            bundle.log = std::move(log);
        }
    }
    bundle.plan = std::move(plan);
    return bundle;
}

}  // namespace accep
