#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "accep/caseio.hpp"
#include "accep/formulation.hpp"
#include "accep/results.hpp"
#include "support.hpp"

using namespace accep;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string case3_text() { return slurp(testing::data_path("case3.json")); }

CaseError::Kind parse_error(const std::string& text, std::string* message = nullptr) {
    try {
        parse_case(text);
    } catch (const CaseError& e) {
        if (message) *message = e.what();
        return e.kind();
    }
    FAIL("case parsed");
    return CaseError::Kind::invalid;
}

void replace(std::string& s, const std::string& from, const std::string& to) {
    const auto at = s.find(from);
    REQUIRE(at != std::string::npos);
    s.replace(at, from.size(), to);
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("accep_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PlanSolution solve_dc(const LoadedCase& lc) {
    const auto f = build_formulation(lc.network, lc.series, FormulationKind::dc);
    const auto sol = conic::solve(f.program);
    REQUIRE(sol.ok());
    return extract_plan(f, lc.network, lc.series, sol);
}

std::size_t count_lines(const std::string& text, const std::string& prefix) {
    std::istringstream in(text);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);)
        if (line.rfind(prefix, 0) == 0) ++n;
    return n;
}

}  // namespace

TEST_CASE("case5 loads", "[caseio]") {
    const auto lc = load_case(testing::data_path("case5.json"));
    CHECK(lc.network.buses.size() == 5);
    CHECK(lc.network.ac_branches.size() == 6);
    CHECK(lc.series.load_p.rows() == 5);
    CHECK(lc.series.load_q.cols() == static_cast<Eigen::Index>(lc.series.size()));
}

TEST_CASE("misspelt keys are named", "[caseio]") {
    auto text = case3_text();
    replace(text, "\"base_mva\"", "\"frequnecy\": 50, \"base_mva\"");
    std::string msg;
    CHECK(parse_error(text, &msg) == CaseError::Kind::unknown_key);
    CHECK(msg.find("frequnecy") != std::string::npos);
}

TEST_CASE("series referencing unknown buses is rejected", "[caseio]") {
    auto text = case3_text();
    replace(text, "\"b3\": [", "\"b9\": [");
    CHECK(parse_error(text) == CaseError::Kind::dangling_reference);
}

TEST_CASE("series length mismatch is rejected", "[caseio]") {
    auto text = case3_text();
    replace(text, "1.2\n", "1.2, 1.3\n");
    CHECK(parse_error(text) == CaseError::Kind::dangling_reference);
}

TEST_CASE("unknown branch endpoint is rejected", "[caseio]") {
    auto text = case3_text();
    replace(text, "\"to\": \"b2\"", "\"to\": \"b7\"");
    CHECK(parse_error(text) == CaseError::Kind::dangling_reference);
}

TEST_CASE("schema version is checked", "[caseio]") {
    auto text = case3_text();
    replace(text, "\"schema_version\": 1", "\"schema_version\": 7");
    CHECK(parse_error(text) == CaseError::Kind::schema_version);
}

TEST_CASE("malformed json reports a parse error", "[caseio]") {
    CHECK(parse_error("{\"buses\": [") == CaseError::Kind::parse);
}

TEST_CASE("results round trip", "[caseio]") {
    const auto lc = load_case(testing::data_path("case5.json"));
    ResultBundle b;
    b.case_path = testing::data_path("case5.json").string();
    b.plan = solve_dc(lc);
    const auto first = scratch("rt1"), second = scratch("rt2");
    write_results(first, lc.network, b);
    const auto back = read_results(first, lc.network);
    write_results(second, lc.network, back);
    for (const auto& name : {"plan.csv", "dispatch.csv", "flows.csv", "buses.csv", "objective.json",
                             "loss_audit.csv", "reinforcement_log.json"}) {
        INFO(name);
        CHECK(slurp(first / name) == slurp(second / name));
    }
    const auto canon = canonical_plan(b.plan, lc.network, lc.series.size());
    CHECK(back.plan.u_source == canon.u_source);
    CHECK(back.plan.p == canon.p);
    CHECK(back.plan.theta == canon.theta);
    CHECK(back.plan.objective == b.plan.objective);
    CHECK(back.case_path == b.case_path);

    // one flow row per AC branch and snapshot
    const auto flows = slurp(first / "flows.csv");
    CHECK(count_lines(flows, "ac,") == 6 * lc.series.size());
}

TEST_CASE("empty snapshot set writes headers only", "[caseio]") {
    const auto lc = load_case(testing::data_path("case3.json"));
    ResultBundle b;
    b.plan = canonical_plan(PlanSolution{}, lc.network, 0);
    const auto dir = scratch("empty");
    write_results(dir, lc.network, b);
    for (const auto& name : {"dispatch.csv", "flows.csv", "buses.csv"}) {
        const auto text = slurp(dir / name);
        INFO(name);
        CHECK(count_lines(text, "") == 1);
    }
}

TEST_CASE("missing results directory is an error", "[caseio]") {
    const auto lc = load_case(testing::data_path("case3.json"));
    CHECK_THROWS_AS(read_results(fs::temp_directory_path() / "accep_test_nowhere", lc.network), ResultsError);
}
