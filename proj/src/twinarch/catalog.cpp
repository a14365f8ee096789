#include "twinarch/catalog.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_set>

#include "twinarch/error.hpp"

namespace twinarch::catalog {

namespace {

using RK = RelationKind;

std::vector<EntityDef> embedded_entities() {
  return {
      {"dte_1", "PhysicalTwin", "A real entity to be digitally replicated."},
      {"dte_2", "DataProvider",
       "A facilitator of data, responsible for transmitting raw data from the physical system to "
       "the DT."},
      {"dte_3", "DataReceiver",
       "A mediator between physical and digital twins, responsible for ensuring the transmission "
       "of feedback from the DT to the physical world."},
      {"dte_4", "Adapter",
       "An information converter, responsible for ensuring compatibility and integration between "
       "multiple data sources and the DT."},
      {"dte_5", "P2DAdapter",
       "An adapter for physical data, responsible for converting and preparing data for "
       "integration into the DT system."},
      {"dte_6", "D2PAdapter",
       "An adapter for DT data, responsible for converting and preparing data for integration "
       "into dte_1."},
      {"dte_7", "DigitalRepresentation",
       "A digital representation of a real-world entity, responsible for abstracting its key "
       "structural and behavioral aspects."},
      {"dte_8", "DigitalShadow",
       "A collection of temporal data traces, responsible for representing dte_1 states grouped "
       "by shadow types."},
      {"dte_9", "ShadowManager",
       "A creator and manager of multiple dte_8, responsible for lifecycle management of digital "
       "shadows."},
      {"dte_10", "DigitalModel",
       "A digital representation of dte_1 behavioral aspects, for enabling dynamic simulation."},
      {"dte_11", "ModelManager",
       "A creator and manager of multiple dte_10, responsible for integrating and synchronizing "
       "multiple digital models."},
      {"dte_12", "TwinManager",
       "A central orchestrator to dte_9 and dte_11 combined functionalities, responsible for "
       "cohesive management."},
      {"dte_13", "ServiceManager",
       "A creator of DT services, responsible for managing and executing DT services."},
      {"dte_14", "FeedbackProvider",
       "A generator of alerts, events, and commands, responsible for channeling feedback from the "
       "DT to the dte_1."},
      {"dte_15", "DataManager",
       "An aggregator of data circulating within the DT, responsible for efficient management, "
       "storage, and retrieval."},
      {"dte_16", "DataModel",
       "A model representing the logical structure of exchanged data, for ensuring data "
       "interoperability."},
  };
}

std::vector<ComponentDef> embedded_components() {
  return {
      {"dtc_1", "PhysicalTwin", "A real-world asset to be replicated by the Digital Twin.", {}, {}},
      {"dtc_2", "DataProvider",
       "An intermediary facilitating the transmission of raw data from the physical to the "
       "Digital Twin.",
       {},
       {}},
      {"dtc_3", "DataReceiver",
       "A receiver ensuring feedback, updates, or commands from the dtc_22 reach the Physical "
       "Twin.",
       {},
       {}},
      {"dtc_4", "P2DAdapter",
       "A converter that translates physical system data into formats usable by the DT.",
       {},
       {}},
      {"dtc_5", "D2PAdapter",
       "A translator that transforms Digital Twin outputs into formats usable by dtc_1.",
       {},
       {}},
      {"dtc_6", "DataProcessor",
       "A processing unit that filters and organizes raw data, preparing them for integration "
       "into the DT system.",
       {},
       {}},
      {"dtc_7", "StorageManager",
       "A component that organizes and manages shared data repository dtc_9 for efficient "
       "storage and retrieval.",
       {"CRUDop"},
       {}},
      {"dtc_8", "DataManager",
       "A centralized component ensuring data consistency and availability, aggregating dtc_6 "
       "and dtc_7 functionalities.",
       {"CRUDop"},
       {}},
      {"dtc_9", "SharedStorage",
       "A data accumulator, responsible for storing heterogeneous data from both the physical and "
       "digital twins.",
       {},
       {}},
      {"dtc_10", "ShadowManager",
       "A component responsible for creating, managing, and overseeing the lifecycle of multiple "
       "digital shadows.",
       {"getShadow"},
       {"CRUDop"}},
      {"dtc_11", "ModelManager",
       "A component responsible for creating and managing multiple digital models to simulate "
       "different aspects.",
       {},
       {"modelExecution"}},
      {"dtc_12", "ModelEngine",
       "A processing unit of digital models, responsible for executing simulations and generating "
       "results based on the modeled scenarios.",
       {"modelExecution"},
       {}},
      {"dtc_13", "Simulator",
       "A virtualizer of real-world systems, responsible for simulating the behavior of the "
       "physical system under various conditions.",
       {"getSimState", "scenarioSim"},
       {}},
      {"dtc_14", "TwinManager",
       "An orchestrator synchronizing the functionalities of shadow and model managers with the "
       "service-related components for cohesive DT operations.",
       {"newScenarioSim"},
       {"getShadow", "getSimState", "scenarioSim", "getState", "prediction", "CRUDop"}},
      {"dtc_15", "StateMonitor",
       "A monitoring component, responsible for collecting and forwarding real/simulated states "
       "to other components for further analysis or action.",
       {"getState"},
       {"CRUDop"}},
      {"dtc_16", "DeviationDetector",
       "A comparison unit, responsible for identifying deviations by comparing real or predicted "
       "states with expected states to detect any deviation.",
       {},
       {}},
      {"dtc_17", "Predictor",
       "A forecasting component, responsible for using current and historical data to anticipate "
       "potential future states of the physical system.",
       {"prediction"},
       {}},
      {"dtc_18", "Analyzer",
       "A detailed analytical component, responsible for analyzing real, predicted and simulated "
       "states to extract meaningful insights.",
       {"prediction"},
       {}},
      {"dtc_19", "SolutionFinder",
       "A component responsible for finding the best set of actions to return the system to a "
       "desired state after deviation detection.",
       {},
       {"genScenario"}},
      {"dtc_20", "ScenarioGenerator",
       "A generator designed to create diverse scenarios, facilitating the preparation and "
       "execution of multiple simulations.",
       {"genScenario"},
       {}},
      {"dtc_21", "Planner",
       "A planning unit, responsible for developing a solution plan to restore the system to a "
       "desired state when deviations or anomalies are detected",
       {},
       {"newScenarioSim"}},
      {"dtc_22", "FeedbackExecutor",
       "A generator of alerts or actionable instructions into the physical system dtc_1.",
       {},
       {}},
  };
}

std::vector<Relationship> embedded_relationships() {
  return {
      // Module view.
      {RK::IsPartOfComposition, "dte_2", "dte_1", "1"},
      {RK::IsPartOfComposition, "dte_3", "dte_1", "1"},
      {RK::IsA, "dte_5", "dte_4", std::nullopt},
      {RK::IsA, "dte_6", "dte_4", std::nullopt},
      {RK::Use, "dte_2", "dte_5", std::nullopt},
      {RK::Use, "dte_6", "dte_3", std::nullopt},
      {RK::Use, "dte_5", "dte_16", std::nullopt},
      {RK::Use, "dte_5", "dte_15", std::nullopt},
      {RK::Abstraction, "dte_7", "dte_1", std::nullopt},
      {RK::IsA, "dte_8", "dte_7", std::nullopt},
      {RK::IsA, "dte_10", "dte_7", std::nullopt},
      {RK::IsPartOfComposition, "dte_8", "dte_9", "1..*"},
      {RK::IsPartOfComposition, "dte_10", "dte_11", "1..*"},
      {RK::Use, "dte_12", "dte_9", std::nullopt},
      {RK::Use, "dte_12", "dte_11", std::nullopt},
      {RK::Use, "dte_12", "dte_13", std::nullopt},
      {RK::IsPartOfComposition, "dte_14", "dte_13", "1"},
      {RK::Use, "dte_14", "dte_6", std::nullopt},
      {RK::Use, "dte_15", "dte_16", std::nullopt},
      {RK::Use, "dte_12", "dte_15", std::nullopt},
      {RK::Use, "dte_13", "dte_15", std::nullopt},
      {RK::Use, "dte_9", "dte_15", std::nullopt},
      // Component view.
      {RK::IsPartOfComposition, "dtc_2", "dtc_1", std::nullopt},
      {RK::IsPartOfComposition, "dtc_3", "dtc_1", std::nullopt},
      {RK::PortAttachment, "dtc_2", "dtc_4", std::nullopt},
      {RK::PortAttachment, "dtc_5", "dtc_3", std::nullopt},
      {RK::PortAttachment, "dtc_4", "dtc_6", std::nullopt},
      {RK::IsPartOfComposition, "dtc_6", "dtc_8", std::nullopt},
      {RK::IsPartOfComposition, "dtc_7", "dtc_8", std::nullopt},
      {RK::InterfaceDelegation, "dtc_8", "dtc_7", std::nullopt},
      {RK::Use, "dtc_7", "dtc_9", std::nullopt},
      {RK::PortAttachment, "dtc_10", "dtc_6", std::nullopt},
      {RK::Assembly, "dtc_10", "dtc_8", std::nullopt},
      {RK::Assembly, "dtc_11", "dtc_12", std::nullopt},
      {RK::IsPartOfComposition, "dtc_11", "dtc_13", std::nullopt},
      {RK::IsPartOfComposition, "dtc_12", "dtc_13", std::nullopt},
      {RK::Assembly, "dtc_14", "dtc_13", std::nullopt},
      {RK::Assembly, "dtc_14", "dtc_10", std::nullopt},
      {RK::Assembly, "dtc_14", "dtc_15", std::nullopt},
      {RK::Assembly, "dtc_14", "dtc_18", std::nullopt},
      {RK::Assembly, "dtc_14", "dtc_8", std::nullopt},
      {RK::Assembly, "dtc_15", "dtc_8", std::nullopt},
      {RK::IsPartOfComposition, "dtc_16", "dtc_18", std::nullopt},
      {RK::IsPartOfComposition, "dtc_17", "dtc_18", std::nullopt},
      {RK::InterfaceDelegation, "dtc_18", "dtc_17", std::nullopt},
      {RK::PortAttachment, "dtc_19", "dtc_16", std::nullopt},
      {RK::Assembly, "dtc_19", "dtc_20", std::nullopt},
      {RK::PortAttachment, "dtc_21", "dtc_19", std::nullopt},
      {RK::Assembly, "dtc_21", "dtc_14", std::nullopt},
      {RK::PortAttachment, "dtc_21", "dtc_22", std::nullopt},
      {RK::PortAttachment, "dtc_16", "dtc_22", std::nullopt},
      {RK::PortAttachment, "dtc_22", "dtc_5", std::nullopt},
  };
}

// Rows of the matrix diagram, component name -> entity names.
TraceabilityMatrix embedded_matrix(const std::vector<EntityDef>& entities,
                                   const std::vector<ComponentDef>& components) {
  static const std::vector<std::pair<std::string_view, std::vector<std::string_view>>> kRows = {
      {"PhysicalTwin", {"PhysicalTwin"}},
      {"DataProvider", {"DataProvider"}},
      {"DataReceiver", {"DataReceiver"}},
      {"P2DAdapter", {"Adapter", "P2DAdapter"}},
      {"D2PAdapter", {"Adapter", "D2PAdapter"}},
      {"DataProcessor", {"DataManager", "DataModel"}},
      {"StorageManager", {"DataManager"}},
      {"DataManager", {"DataManager"}},
      {"SharedStorage", {"DataManager", "DataModel"}},
      {"ShadowManager", {"DigitalRepresentation", "DigitalShadow", "ShadowManager"}},
      {"ModelManager", {"DigitalRepresentation", "ModelManager"}},
      {"ModelEngine", {"DigitalModel", "ModelManager"}},
      {"Simulator", {"DigitalRepresentation", "DigitalModel", "ModelManager"}},
      {"TwinManager", {"TwinManager"}},
      {"StateMonitor", {"ServiceManager"}},
      {"DeviationDetector", {"ServiceManager"}},
      {"Predictor", {"ServiceManager"}},
      {"Analyzer", {"ServiceManager"}},
      {"SolutionFinder", {"ServiceManager"}},
      {"ScenarioGenerator", {"ServiceManager"}},
      {"Planner", {"ServiceManager"}},
      {"FeedbackExecutor", {"FeedbackProvider"}},
  };
  auto id_of = [](const auto& defs, std::string_view name) {
    for (const auto& d : defs) {
      if (d.name == name) return d.id;
    }
    fail(ErrorCode::CatalogCorrupt, "matrix references unknown element " + std::string(name));
  };
  TraceabilityMatrix m;
  for (const auto& [component, row] : kRows) {
    for (auto entity : row) m.cells.insert({id_of(components, component), id_of(entities, entity)});
  }
  return m;
}

IsoMappingRow iso_row(std::string fe, std::string domain, std::vector<std::string> mtv,
                      std::vector<std::string> ctv) {
  const Support ms = mtv.empty() ? Support::None : Support::Full;
  const Support cs = ctv.empty() ? Support::None : Support::Full;
  return {std::move(fe), std::move(domain), std::move(mtv), std::move(ctv), ms, cs};
}

std::vector<IsoMappingRow> embedded_iso() {
  const std::string omd = "Observable Manufacturing Domain";
  const std::string dcdc = "Data Collection and Device Control Domain";
  const std::string cross = "Cross-System Domain";
  const std::string core = "Core Domain";
  const std::string user = "User Domain";
  return {
      iso_row("Observable Manufacturing Elements", omd, {"PhysicalTwin"}, {"PhysicalTwin"}),
      iso_row("Data Collecting", dcdc, {"DataProvider"}, {"DataProvider"}),
      iso_row("Data Pre-Processing", dcdc, {"DataManager"}, {"DataProcessor"}),
      iso_row("Data Translation", cross, {"Adapter", "P2DAdapter", "D2PAdapter"},
              {"P2DAdapter", "D2PAdapter"}),
      iso_row("Controlling", dcdc, {"FeedbackProvider"}, {"FeedbackExecutor"}),
      iso_row("Actuation", dcdc, {"DataReceiver"}, {"DataReceiver"}),
      iso_row("Digital Modeling", core, {"DigitalRepresentation", "DigitalModel"},
              {"ModelEngine"}),
      iso_row("Maintenance", core, {}, {}),
      iso_row("Synchronization", core, {"DataProvider", "DataReceiver", "TwinManager"},
              {"DataProvider", "DataReceiver", "TwinManager"}),
      iso_row("Simulation", core, {"ModelManager"}, {"Simulator"}),
      iso_row("Analytic Service", core, {"ServiceManager"}, {"Analyzer"}),
      iso_row("Reporting", core, {"TwinManager"}, {"TwinManager", "StateMonitor"}),
      iso_row("Application Support", core, {"TwinManager"}, {"TwinManager"}),
      iso_row("Interoperability Support", core, {"DataModel", "DataManager"},
              {"DataProcessor", "SharedStorage"}),
      iso_row("Access Control", core, {}, {}),
      iso_row("Security Support", cross, {}, {}),
      iso_row("User Interface", user, {"TwinManager"}, {"TwinManager"}),
  };
}

Catalog build_embedded() {
  Catalog c;
  c.entities = embedded_entities();
  c.components = embedded_components();
  c.relationships = embedded_relationships();
  c.matrix = embedded_matrix(c.entities, c.components);
  c.iso = embedded_iso();
  return c;
}

bool is_entity_id(std::string_view id) { return id.starts_with("dte_"); }
bool is_component_id(std::string_view id) { return id.starts_with("dtc_"); }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string elements_or_unsupported(const std::vector<std::string>& v) {
  return v.empty() ? std::string("unsupported") : join(v, ", ");
}

RelationKind kind_from_string(std::string_view s) {
  for (auto k : {RK::IsPartOfComposition, RK::IsPartOfAggregation, RK::IsA, RK::Use,
                 RK::Abstraction, RK::Assembly, RK::PortAttachment, RK::InterfaceDelegation}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::CatalogCorrupt, "unknown relationship kind " + std::string(s));
}

Support support_from_string(std::string_view s) {
  for (auto k : {Support::Full, Support::Partial, Support::None}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::CatalogCorrupt, "unknown support marker " + std::string(s));
}

}  // namespace

bool is_known_interface(std::string_view name) noexcept {
  return std::find(std::begin(kInterfaces), std::end(kInterfaces), name) != std::end(kInterfaces);
}

std::string_view to_string(RelationKind kind) noexcept {
  switch (kind) {
    case RK::IsPartOfComposition: return "IsPartOfComposition";
    case RK::IsPartOfAggregation: return "IsPartOfAggregation";
    case RK::IsA: return "IsA";
    case RK::Use: return "Use";
    case RK::Abstraction: return "Abstraction";
    case RK::Assembly: return "Assembly";
    case RK::PortAttachment: return "PortAttachment";
    case RK::InterfaceDelegation: return "InterfaceDelegation";
  }
  return "?";
}

std::string_view to_string(Support s) noexcept {
  switch (s) {
    case Support::Full: return "Full";
    case Support::Partial: return "Partial";
    case Support::None: return "None";
  }
  return "?";
}

void TraceabilityMatrix::clear_component(std::string_view component_id) {
  std::erase_if(cells, [&](const TraceCell& c) { return c.component_id == component_id; });
}

const EntityDef* Catalog::entity(std::string_view key) const noexcept {
  for (const auto& e : entities) {
    if (e.id == key || e.name == key) return &e;
  }
  return nullptr;
}

const ComponentDef* Catalog::component(std::string_view key) const noexcept {
  for (const auto& c : components) {
    if (c.id == key || c.name == key) return &c;
  }
  return nullptr;
}

bool Catalog::is_element_name(std::string_view name) const noexcept {
  const auto by_name = [&](const auto& v) {
    return std::any_of(v.begin(), v.end(), [&](const auto& d) { return d.name == name; });
  };
  return by_name(entities) || by_name(components);
}

bool Catalog::operator==(const Catalog& o) const { return to_json(*this) == to_json(o); }

bool relationship_legal(const Catalog& catalog, const Relationship& rel) noexcept {
  const bool from_entity = is_entity_id(rel.from) && catalog.entity(rel.from);
  const bool to_entity = is_entity_id(rel.to) && catalog.entity(rel.to);
  const bool from_component = is_component_id(rel.from) && catalog.component(rel.from);
  const bool to_component = is_component_id(rel.to) && catalog.component(rel.to);
  if (rel.from == rel.to) return false;
  if (from_entity && to_entity) {
    switch (rel.kind) {
      case RK::IsPartOfComposition:
      case RK::IsPartOfAggregation:
      case RK::IsA:
      case RK::Use:
      case RK::Abstraction: return true;
      default: return false;
    }
  }
  if (from_component && to_component) {
    switch (rel.kind) {
      case RK::IsPartOfComposition:
      case RK::Use:
      case RK::Assembly:
      case RK::PortAttachment:
      case RK::InterfaceDelegation: return true;
      default: return false;
    }
  }
  return false;
}

void validate(const Catalog& c) {
  auto corrupt = [](const std::string& why) { fail(ErrorCode::CatalogCorrupt, why); };
  if (c.entities.size() != 16) corrupt("expected 16 entities");
  if (c.components.size() != 22) corrupt("expected 22 components");
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < c.entities.size(); ++i) {
    const auto& e = c.entities[i];
    if (e.id != "dte_" + std::to_string(i + 1)) corrupt("entity id out of sequence: " + e.id);
    if (!ids.insert(e.id).second) corrupt("duplicate id " + e.id);
    if (e.name.empty()) corrupt("entity without name: " + e.id);
  }
  for (std::size_t i = 0; i < c.components.size(); ++i) {
    const auto& comp = c.components[i];
    if (comp.id != "dtc_" + std::to_string(i + 1)) corrupt("component id out of sequence: " + comp.id);
    if (!ids.insert(comp.id).second) corrupt("duplicate id " + comp.id);
    for (const auto* list : {&comp.provided_interfaces, &comp.required_interfaces}) {
      for (const auto& iface : *list) {
        if (!is_known_interface(iface)) corrupt("unknown interface " + iface + " on " + comp.id);
      }
    }
  }
  for (const auto& r : c.relationships) {
    if (!relationship_legal(c, r)) {
      corrupt("illegal relationship " + std::string(to_string(r.kind)) + " " + r.from + "->" + r.to);
    }
  }
  for (const auto& cell : c.matrix.cells) {
    if (!c.component(cell.component_id) || !is_component_id(cell.component_id) ||
        !c.entity(cell.entity_id) || !is_entity_id(cell.entity_id)) {
      corrupt("matrix cell references unknown element");
    }
  }
  if (c.iso.size() != 17) corrupt("expected 17 ISO functional entities");
  for (const auto& row : c.iso) {
    for (const auto* list : {&row.mtv_elements, &row.ctv_elements}) {
      for (const auto& name : *list) {
        if (!c.is_element_name(name)) corrupt("ISO row references unknown element " + name);
      }
    }
  }
}

const Catalog& load_catalog() {
  static const Catalog instance = [] {
    Catalog c = build_embedded();
    validate(c);
    return c;
  }();
  return instance;
}

ConformanceReport check_traceability(const Catalog& catalog, const TraceabilityMatrix& matrix) {
  ConformanceReport report;
  report.total_cells = matrix.cells.size();
  for (const auto& comp : catalog.components) {
    const bool mapped = std::any_of(matrix.cells.begin(), matrix.cells.end(),
                                    [&](const TraceCell& cell) { return cell.component_id == comp.id; });
    if (!mapped) report.unmapped_components.push_back(comp.name);
  }
  for (const auto& cell : matrix.cells) {
    if (!catalog.component(cell.component_id) || !catalog.entity(cell.entity_id)) {
      report.findings.push_back("cell (" + cell.component_id + ", " + cell.entity_id +
                                ") references an unknown element");
    }
  }
  return report;
}

ConformanceReport check_catalog(const Catalog& catalog) {
  ConformanceReport report = check_traceability(catalog, catalog.matrix);
  for (const auto& r : catalog.relationships) {
    if (!relationship_legal(catalog, r)) {
      report.findings.push_back("illegal " + std::string(to_string(r.kind)) + " relationship " +
                                r.from + " -> " + r.to);
    }
  }
  // Every provided interface is required elsewhere or exported by the orchestrator.
  const auto* orchestrator = catalog.component("TwinManager");
  for (const auto& comp : catalog.components) {
    for (const auto& iface : comp.provided_interfaces) {
      bool consumed = orchestrator && &comp == orchestrator;
      for (const auto& other : catalog.components) {
        if (&other == &comp) continue;
        if (std::find(other.required_interfaces.begin(), other.required_interfaces.end(), iface) !=
            other.required_interfaces.end()) {
          consumed = true;
        }
      }
      if (!consumed) report.findings.push_back("interface " + iface + " provided by " + comp.name +
                                               " has no consumer");
    }
  }
  return report;
}

std::string format_check_report(const ConformanceReport& report) {
  std::ostringstream out;
  out << "traceability cells: " << report.total_cells << "\n";
  out << "unmapped components: " << report.unmapped_components.size() << "\n";
  for (const auto& name : report.unmapped_components) out << "  - " << name << "\n";
  out << "findings: " << report.findings.size() << "\n";
  for (const auto& f : report.findings) out << "  - " << f << "\n";
  out << "verdict: " << (report.ok() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

std::string iso_report(const Catalog& catalog) {
  std::ostringstream out;
  out << "ISO 23247 functional entity mapping (" << catalog.iso.size() << " rows)\n";
  for (const auto& row : catalog.iso) {
    out << row.functional_entity << " → " << elements_or_unsupported(row.mtv_elements) << " / "
        << elements_or_unsupported(row.ctv_elements) << "  [" << to_string(row.mtv_support) << "/"
        << to_string(row.ctv_support) << "] (" << row.iso_domain << ")\n";
  }
  return out.str();
}

nlohmann::ordered_json iso_report_json(const Catalog& catalog) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : catalog.iso) {
    rows.push_back({{"functional_entity", row.functional_entity},
                    {"iso_domain", row.iso_domain},
                    {"mtv_elements", row.mtv_elements},
                    {"ctv_elements", row.ctv_elements},
                    {"mtv_support", to_string(row.mtv_support)},
                    {"ctv_support", to_string(row.ctv_support)}});
  }
  return rows;
}

std::string traceability_report(const Catalog& catalog) {
  std::ostringstream out;
  std::map<std::string, std::vector<std::string>> rows;
  for (const auto& cell : catalog.matrix.cells) {
    rows[cell.component_id].push_back(catalog.entity(cell.entity_id)->name);
  }
  out << "Traceability matrix (" << catalog.components.size() << " components, "
      << catalog.matrix.cells.size() << " cells)\n";
  for (const auto& comp : catalog.components) {
    auto& entities = rows[comp.id];
    // Order entities by catalog position, not by name.
    std::sort(entities.begin(), entities.end(), [&](const std::string& a, const std::string& b) {
      return catalog.entity(a) < catalog.entity(b);
    });
    out << comp.id << " " << comp.name << " → " << (entities.empty() ? "-" : join(entities, ", "))
        << "\n";
  }
  return out.str();
}

nlohmann::ordered_json traceability_report_json(const Catalog& catalog) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& comp : catalog.components) {
    std::vector<std::string> entities;
    for (const auto& e : catalog.entities) {
      if (catalog.matrix.cells.count({comp.id, e.id})) entities.push_back(e.name);
    }
    rows.push_back({{"component_id", comp.id}, {"component", comp.name}, {"entities", entities}});
  }
  return rows;
}

nlohmann::ordered_json to_json(const Catalog& c) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["entities"] = oj::array();
  for (const auto& e : c.entities) {
    j["entities"].push_back({{"id", e.id}, {"name", e.name}, {"description", e.description}});
  }
  j["components"] = oj::array();
  for (const auto& comp : c.components) {
    j["components"].push_back({{"id", comp.id},
                               {"name", comp.name},
                               {"description", comp.description},
                               {"provided_interfaces", comp.provided_interfaces},
                               {"required_interfaces", comp.required_interfaces}});
  }
  j["relationships"] = oj::array();
  for (const auto& r : c.relationships) {
    oj rel = {{"kind", to_string(r.kind)}, {"from", r.from}, {"to", r.to}};
    rel["multiplicity"] = r.multiplicity ? oj(*r.multiplicity) : oj(nullptr);
    j["relationships"].push_back(std::move(rel));
  }
  j["matrix"] = oj::array();
  for (const auto& cell : c.matrix.cells) {
    j["matrix"].push_back({{"component_id", cell.component_id}, {"entity_id", cell.entity_id}});
  }
  j["iso"] = iso_report_json(c);
  return j;
}

Catalog from_json(const nlohmann::json& j) {
  try {
    Catalog c;
    for (const auto& e : j.at("entities")) {
      c.entities.push_back({e.at("id").get<std::string>(), e.at("name").get<std::string>(),
                            e.at("description").get<std::string>()});
    }
    for (const auto& comp : j.at("components")) {
      c.components.push_back({comp.at("id").get<std::string>(), comp.at("name").get<std::string>(),
                              comp.at("description").get<std::string>(),
                              comp.at("provided_interfaces").get<std::vector<std::string>>(),
                              comp.at("required_interfaces").get<std::vector<std::string>>()});
    }
    for (const auto& r : j.at("relationships")) {
      Relationship rel{kind_from_string(r.at("kind").get<std::string>()),
                       r.at("from").get<std::string>(), r.at("to").get<std::string>(),
                       std::nullopt};
      if (r.contains("multiplicity") && !r["multiplicity"].is_null()) {
        rel.multiplicity = r["multiplicity"].get<std::string>();
      }
      c.relationships.push_back(std::move(rel));
    }
    for (const auto& cell : j.at("matrix")) {
      c.matrix.cells.insert(
          {cell.at("component_id").get<std::string>(), cell.at("entity_id").get<std::string>()});
    }
    for (const auto& row : j.at("iso")) {
      c.iso.push_back({row.at("functional_entity").get<std::string>(),
                       row.at("iso_domain").get<std::string>(),
                       row.at("mtv_elements").get<std::vector<std::string>>(),
                       row.at("ctv_elements").get<std::vector<std::string>>(),
                       support_from_string(row.at("mtv_support").get<std::string>()),
                       support_from_string(row.at("ctv_support").get<std::string>())});
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CatalogCorrupt, e.what());
  }
}

}  // namespace twinarch::catalog
