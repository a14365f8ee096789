#include <doctest.h>

#include <algorithm>
#include <map>

#include "twinarch/catalog.hpp"
#include "twinarch/error.hpp"

using namespace twinarch;
using namespace twinarch::catalog;

namespace {

const std::vector<std::string> kEntityNames = {
    "PhysicalTwin",  "DataProvider",  "DataReceiver", "Adapter",        "P2DAdapter",     "D2PAdapter",
    "DigitalRepresentation", "DigitalShadow", "ShadowManager", "DigitalModel", "ModelManager", "TwinManager",
    "ServiceManager", "FeedbackProvider", "DataManager", "DataModel"};

const std::vector<std::string> kComponentNames = {
    "PhysicalTwin",   "DataProvider",      "DataReceiver", "P2DAdapter",     "D2PAdapter",    "DataProcessor",
    "StorageManager", "DataManager",       "SharedStorage", "ShadowManager", "ModelManager",  "ModelEngine",
    "Simulator",      "TwinManager",       "StateMonitor", "DeviationDetector", "Predictor",  "Analyzer",
    "SolutionFinder", "ScenarioGenerator", "Planner",      "FeedbackExecutor"};

// Checkmarks per component row of the matrix table, dtc_1..dtc_22.
const int kRowSums[] = {1, 1, 1, 2, 2, 2, 1, 1, 2, 3, 2, 2, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1};

}  // namespace

TEST_CASE("catalog carries every entity and component in id order") {
  const auto& c = load_catalog();
  REQUIRE(c.entities.size() == kEntityNames.size());
  REQUIRE(c.components.size() == kComponentNames.size());
  for (std::size_t i = 0; i < kEntityNames.size(); ++i) {
    CHECK(c.entities[i].name == kEntityNames[i]);
    CHECK(c.entities[i].id == "dte_" + std::to_string(i + 1));
  }
  for (std::size_t i = 0; i < kComponentNames.size(); ++i) {
    CHECK(c.components[i].name == kComponentNames[i]);
    CHECK(c.components[i].id == "dtc_" + std::to_string(i + 1));
  }
  CHECK(c.entity("ShadowManager") != nullptr);
  CHECK(c.component("dtc_17")->name == "Predictor");
  CHECK(c.is_element_name("Simulator"));
  CHECK_FALSE(c.is_element_name("Simulatr"));
}

TEST_CASE("matrix row sums match the table") {
  const auto& c = load_catalog();
  std::map<std::string, int> rows;
  for (const auto& cell : c.matrix.cells) rows[cell.component_id]++;
  int total = 0;
  for (int i = 0; i < 22; ++i) {
    CHECK_MESSAGE(rows["dtc_" + std::to_string(i + 1)] == kRowSums[i], "dtc_" << i + 1);
    total += kRowSums[i];
  }
  CHECK(c.matrix.cells.size() == static_cast<std::size_t>(total));
  CHECK(total == 32);
}

TEST_CASE("traceability check on the embedded matrix") {
  const auto& c = load_catalog();
  auto r = check_traceability(c, c.matrix);
  CHECK(r.unmapped_components.empty());
  CHECK(r.total_cells == c.matrix.cells.size());
  CHECK(check_catalog(c).ok());
}

TEST_CASE("clearing a component row is reported as unmapped") {
  const auto& c = load_catalog();
  auto m = c.matrix;
  m.clear_component("dtc_12");
  auto r = check_traceability(c, m);
  REQUIRE(r.unmapped_components.size() == 1);
  CHECK(r.unmapped_components[0] == "ModelEngine");
}

TEST_CASE("interfaces are drawn from the closed set") {
  for (const auto& comp : load_catalog().components) {
    for (const auto& i : comp.provided_interfaces) CHECK(is_known_interface(i));
    for (const auto& i : comp.required_interfaces) CHECK(is_known_interface(i));
  }
  CHECK_FALSE(is_known_interface("teleport"));
}

TEST_CASE("illegal relationship corrupts the catalog") {
  Catalog c = load_catalog();
  CHECK_NOTHROW(validate(c));
  c.relationships.push_back({RelationKind::Assembly, "dte_1", "dte_2", std::nullopt});
  CHECK_FALSE(relationship_legal(c, c.relationships.back()));
  CHECK_THROWS_AS(validate(c), Error);

  Catalog d = load_catalog();
  d.components[3].provided_interfaces.push_back("bogus");
  CHECK_THROWS_AS(validate(d), Error);
}

TEST_CASE("json export round-trips") {
  const auto& c = load_catalog();
  const auto j = to_json(c);
  for (const char* key : {"entities", "components", "relationships", "matrix", "iso"}) CHECK(j.contains(key));
  CHECK(from_json(nlohmann::json::parse(j.dump())) == c);
}

TEST_CASE("reports are deterministic and sized") {
  const auto& c = load_catalog();
  CHECK(iso_report(c) == iso_report(c));
  CHECK(iso_report_json(c).size() == 17);
  CHECK(traceability_report_json(c).size() == 22);
  const auto text = traceability_report(c);
  CHECK(text == traceability_report(c));
  CHECK(std::count(text.begin(), text.end(), '\n') >= 22);
}
