#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "accep/conic.hpp"

namespace accep::conic {

Affine& Affine::operator+=(const Affine& other) {
    terms.insert(terms.end(), other.terms.begin(), other.terms.end());
    constant += other.constant;
    return *this;
}

Affine& Affine::operator*=(double s) {
    for (auto& t : terms) t.coef *= s;
    constant *= s;
    return *this;
}

double Affine::evaluate(const Eigen::VectorXd& x) const {
    double v = constant;
    for (const auto& t : terms) v += t.coef * x[t.var];
    return v;
}

namespace {

std::vector<Term> merged(std::vector<Term> terms) {
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> out;
    for (const auto& t : terms) {
        if (!out.empty() && out.back().var == t.var)
            out.back().coef += t.coef;
        else
            out.push_back(t);
    }
    std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
    return out;
}

Affine merged(Affine a) {
    a.terms = merged(std::move(a.terms));
    return a;
}

}  // namespace

int ConvexProgram::add_variable(double lower, double upper, std::string name, std::string bound_tag) {
    variables_.push_back({lower, upper, std::move(name), std::move(bound_tag)});
    cost_.push_back(0.0);
    return static_cast<int>(variables_.size() - 1);
}

int ConvexProgram::add_row(std::vector<Term> terms, double lower, double upper, std::string tag,
                           std::string label) {
    rows_.push_back({merged(std::move(terms)), lower, upper, std::move(tag), std::move(label)});
    return static_cast<int>(rows_.size() - 1);
}

int ConvexProgram::add_cone(std::vector<Affine> args, Affine bound, std::string tag, std::string label) {
    for (auto& a : args) a = merged(std::move(a));
    cones_.push_back({std::move(args), merged(std::move(bound)), std::move(tag), std::move(label)});
    return static_cast<int>(cones_.size() - 1);
}

double ConvexProgram::objective(const Eigen::VectorXd& x) const {
    double v = objective_constant_;
    for (std::size_t j = 0; j < cost_.size(); ++j) v += cost_[j] * x[static_cast<Eigen::Index>(j)];
    return v;
}

std::vector<std::string> ConvexProgram::check_well_formed() const {
    std::vector<std::string> problems;
    const auto n = static_cast<int>(variables_.size());
    for (int j = 0; j < n; ++j) {
        const auto& v = variables_[static_cast<std::size_t>(j)];
        if (std::isnan(v.lower) || std::isnan(v.upper))
            problems.push_back("variable " + std::to_string(j) + " has NaN bound");
        if (!std::isfinite(cost_[static_cast<std::size_t>(j)]))
            problems.push_back("variable " + std::to_string(j) + " has non-finite cost");
    }
    auto check_terms = [&](const std::vector<Term>& terms, const std::string& where) {
        for (const auto& t : terms) {
            if (t.var < 0 || t.var >= n) problems.push_back(where + " references missing variable");
            if (!std::isfinite(t.coef)) problems.push_back(where + " has non-finite coefficient");
        }
    };
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto where = "row " + std::to_string(i) + " (" + rows_[i].label + ")";
        check_terms(rows_[i].terms, where);
        if (std::isnan(rows_[i].lower) || std::isnan(rows_[i].upper)) problems.push_back(where + " has NaN side");
    }
    for (std::size_t k = 0; k < cones_.size(); ++k) {
        const auto where = "cone " + std::to_string(k) + " (" + cones_[k].label + ")";
        check_terms(cones_[k].bound.terms, where);
        if (!std::isfinite(cones_[k].bound.constant)) problems.push_back(where + " has non-finite constant");
        for (const auto& a : cones_[k].args) {
            check_terms(a.terms, where);
            if (!std::isfinite(a.constant)) problems.push_back(where + " has non-finite constant");
        }
    }
    return problems;
}

const char* to_string(Status status) {
    switch (status) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::iteration_limit: return "iteration-limit";
        case Status::numerical_failure: return "numerical-failure";
    }
    return "?";
}

double ResidualReport::max_violation() const {
    return std::max({bounds.max_violation, equalities.max_violation, inequalities.max_violation,
                     cones.max_violation});
}

ResidualReport check_solution(const ConvexProgram& program, const Eigen::VectorXd& x) {
    ResidualReport report;
    auto note = [](ClassResidual& cls, double violation, const std::string& name) {
        if (violation > cls.max_violation) {
            cls.max_violation = violation;
            cls.worst = name;
        }
    };
    const auto& vars = program.variables();
    for (std::size_t j = 0; j < vars.size(); ++j) {
        const double v = x[static_cast<Eigen::Index>(j)];
        const double viol = std::max({0.0, vars[j].lower - v, v - vars[j].upper});
        note(report.bounds, viol, vars[j].name.empty() ? "x" + std::to_string(j) : vars[j].name);
    }
    const auto& rows = program.rows();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double a = 0.0;
        for (const auto& t : rows[i].terms) a += t.coef * x[t.var];
        const double viol = std::max({0.0, rows[i].lower - a, a - rows[i].upper});
        const auto name = rows[i].label.empty() ? rows[i].tag + "#" + std::to_string(i) : rows[i].label;
        note(rows[i].is_equality() ? report.equalities : report.inequalities, viol, name);
    }
    const auto& cones = program.cones();
    for (std::size_t k = 0; k < cones.size(); ++k) {
        double norm2 = 0.0;
        for (const auto& arg : cones[k].args) {
            const double v = arg.evaluate(x);
            norm2 += v * v;
        }
        const double viol = std::max(0.0, std::sqrt(norm2) - cones[k].bound.evaluate(x));
        const auto name = cones[k].label.empty() ? cones[k].tag + "#" + std::to_string(k) : cones[k].label;
        note(report.cones, viol, name);
    }
    return report;
}

namespace {

void write_terms(std::ostream& out, std::vector<Term> terms) {
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    if (terms.empty()) out << "0";
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) out << " ";
        out << (terms[i].coef < 0 ? "- " : (i ? "+ " : "")) << std::abs(terms[i].coef) << " x"
            << terms[i].var;
    }
}

void write_affine(std::ostream& out, const Affine& a) {
    write_terms(out, a.terms);
    if (a.constant != 0.0) out << (a.constant < 0 ? " - " : " + ") << std::abs(a.constant);
}

}  // namespace

void dump_program(const ConvexProgram& program, std::ostream& out) {
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << std::setprecision(17);
    out << "objective " << program.objective_constant();
    for (std::size_t j = 0; j < program.cost().size(); ++j)
        if (program.cost()[j] != 0.0) out << " " << program.cost()[j] << "*x" << j;
    out << "\n";
    for (std::size_t j = 0; j < program.variables().size(); ++j) {
        const auto& v = program.variables()[j];
        out << "var x" << j << " [" << v.lower << ", " << v.upper << "] " << v.name;
        if (!v.bound_tag.empty()) out << " tag=" << v.bound_tag;
        out << "\n";
    }
    for (const auto& r : program.rows()) {
        out << "row " << r.tag << " " << r.label << " : " << r.lower << " <= ";
        write_terms(out, r.terms);
        out << " <= " << r.upper << "\n";
    }
    for (const auto& c : program.cones()) {
        out << "soc " << c.tag << " " << c.label << " : ||(";
        for (std::size_t i = 0; i < c.args.size(); ++i) {
            if (i) out << ", ";
            write_affine(out, c.args[i]);
        }
        out << ")|| <= ";
        write_affine(out, c.bound);
        out << "\n";
    }
    out.flags(flags);
    out.precision(prec);
}

}  // namespace accep::conic
