#pragma once

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace twinarch::catalog {

/// The nine named interfaces of the component view. Provided and required
/// interface lists on components are drawn from this closed set.
inline constexpr std::string_view kInterfaces[] = {
    "CRUDop",   "getShadow",  "modelExecution", "getSimState",    "scenarioSim",
    "getState", "prediction", "genScenario",    "newScenarioSim",
};

bool is_known_interface(std::string_view name) noexcept;

struct EntityDef {
  std::string id;
  std::string name;
  std::string description;
};

struct ComponentDef {
  std::string id;
  std::string name;
  std::string description;
  std::vector<std::string> provided_interfaces;
  std::vector<std::string> required_interfaces;
};

enum class RelationKind {
  IsPartOfComposition,
  IsPartOfAggregation,
  IsA,
  Use,
  Abstraction,
  Assembly,
  PortAttachment,
  InterfaceDelegation,
};

std::string_view to_string(RelationKind kind) noexcept;

struct Relationship {
  RelationKind kind;
  std::string from;
  std::string to;
  std::optional<std::string> multiplicity;
};

struct TraceCell {
  std::string component_id;
  std::string entity_id;
  auto operator<=>(const TraceCell&) const = default;
};

struct TraceabilityMatrix {
  std::set<TraceCell> cells;

  void clear_component(std::string_view component_id);
};

// Mirrors the full / partial / not-supported glyphs used by the mapping tables.
enum class Support { Full, Partial, None };

std::string_view to_string(Support s) noexcept;

struct IsoMappingRow {
  std::string functional_entity;
  std::string iso_domain;
  std::vector<std::string> mtv_elements;
  std::vector<std::string> ctv_elements;
  Support mtv_support;
  Support ctv_support;
};

struct Catalog {
  std::vector<EntityDef> entities;
  std::vector<ComponentDef> components;
  std::vector<Relationship> relationships;
  TraceabilityMatrix matrix;
  std::vector<IsoMappingRow> iso;

  const EntityDef* entity(std::string_view id_or_name) const noexcept;
  const ComponentDef* component(std::string_view id_or_name) const noexcept;
  bool is_element_name(std::string_view name) const noexcept;

  bool operator==(const Catalog&) const;
};

/// The embedded registry. Validated on first use; throws CatalogCorrupt if
/// the embedded tables break their own invariants. Immutable afterwards.
const Catalog& load_catalog();

/// Throws Error(CatalogCorrupt) on the first broken invariant.
void validate(const Catalog& catalog);

/// Relationship-kind legality for the view implied by the two ends.
bool relationship_legal(const Catalog& catalog, const Relationship& rel) noexcept;

struct ConformanceReport {
  std::size_t total_cells = 0;
  std::vector<std::string> unmapped_components;
  std::vector<std::string> findings;

  bool ok() const noexcept { return unmapped_components.empty() && findings.empty(); }
};

ConformanceReport check_traceability(const Catalog& catalog, const TraceabilityMatrix& matrix);

/// Full conformance: traceability plus relationship legality and interface closure.
ConformanceReport check_catalog(const Catalog& catalog);

std::string iso_report(const Catalog& catalog);
nlohmann::ordered_json iso_report_json(const Catalog& catalog);
std::string traceability_report(const Catalog& catalog);
nlohmann::ordered_json traceability_report_json(const Catalog& catalog);
std::string format_check_report(const ConformanceReport& report);

/// Export in the documented `catalog.json` layout
/// (entities[], components[], relationships[], matrix[], iso[]).
nlohmann::ordered_json to_json(const Catalog& catalog);
Catalog from_json(const nlohmann::json& j);

}  // namespace twinarch::catalog
