#include "twinarch/storage.hpp"

#include <algorithm>
#include <cctype>

#include "twinarch/error.hpp"

namespace twinarch {

namespace {

constexpr Namespace kNamespaces[] = {Namespace::Measurements, Namespace::Shadows,
                                     Namespace::SimResults,   Namespace::States,
                                     Namespace::Plans,        Namespace::Feedback};

TimePoint time_field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_string()) fail(ErrorCode::IoError, std::string("journal line lacks ") + name);
  auto t = parse_rfc3339(it->get<std::string>());
  if (!t) fail(ErrorCode::IoError, std::string("bad timestamp in journal field ") + name);
  return *t;
}

}  // namespace

std::string_view to_string(Namespace ns) noexcept {
  switch (ns) {
    case Namespace::Measurements: return "Measurements";
    case Namespace::Shadows: return "Shadows";
    case Namespace::SimResults: return "SimResults";
    case Namespace::States: return "States";
    case Namespace::Plans: return "Plans";
    case Namespace::Feedback: return "Feedback";
  }
  return "Measurements";
}

std::optional<Namespace> namespace_from_string(std::string_view s) noexcept {
  for (auto ns : kNamespaces) {
    const auto name = to_string(ns);
    if (name.size() == s.size() &&
        std::equal(name.begin(), name.end(), s.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return ns;
    }
  }
  return std::nullopt;
}

void validate(const Query& q) {
  if (q.from && q.to && *q.from >= *q.to) fail(ErrorCode::InvalidQuery, "query range needs from < to");
  if (q.limit && *q.limit == 0) fail(ErrorCode::InvalidQuery, "query limit must be at least 1");
}

bool matches(const Query& q, const RecordKey& key) noexcept {
  if (key.ns != q.ns) return false;
  if (q.entity_id && key.entity_id != *q.entity_id) return false;
  if (q.name && key.name != *q.name) return false;
  if (q.from && key.observed_at < *q.from) return false;
  if (q.to && key.observed_at >= *q.to) return false;
  return true;
}

bool read_order(const Record& a, const Record& b) noexcept {
  const auto& x = a.key;
  const auto& y = b.key;
  if (x.observed_at != y.observed_at) return x.observed_at < y.observed_at;
  if (x.entity_id != y.entity_id) return x.entity_id < y.entity_id;
  return x.name < y.name;
}

bool glob_match(std::string_view pattern, std::string_view text) noexcept {
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

json to_json(const RecordKey& key) {
  return json{{"namespace", to_string(key.ns)},
              {"entity", key.entity_id},
              {"name", key.name},
              {"observedAt", format_rfc3339(key.observed_at)}};
}

RecordKey record_key_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::IoError, "record key must be an object");
  RecordKey k;
  auto ns = namespace_from_string(j.value("namespace", std::string()));
  if (!ns) fail(ErrorCode::IoError, "unknown namespace in record key");
  k.ns = *ns;
  k.entity_id = j.value("entity", std::string());
  k.name = j.value("name", std::string());
  k.observed_at = time_field(j, "observedAt");
  return k;
}

json to_json(const Record& r) {
  return json{{"key", to_json(r.key)},
              {"body", r.body},
              {"revision", r.revision},
              {"committed_at", format_rfc3339(r.committed_at)}};
}

// ---------------------------------------------------------------------------
// SharedStorage

SharedStorage::SharedStorage(const std::filesystem::path& journal) {
  if (journal.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(journal.parent_path(), ec);
  }
  journal_.open(journal, std::ios::app);
  if (!journal_) fail(ErrorCode::IoError, "cannot open journal " + journal.string());
}

const Record* SharedStorage::find(const RecordKey& key) const {
  auto it = records_.find(key);
  return it == records_.end() ? nullptr : &it->second;
}

void SharedStorage::put(const Record& r) {
  records_[r.key] = r;
  retired_.erase(r.key);
  journal(r.key, r.body, r.revision, r.committed_at);
}

void SharedStorage::erase(const RecordKey& key, std::uint64_t revision, TimePoint committed_at) {
  records_.erase(key);
  retired_[key] = revision;
  journal(key, nullptr, revision, committed_at);
}

std::vector<Record> SharedStorage::scan(const Query& q) const {
  std::vector<Record> out;
  RecordKey lo{q.ns, q.entity_id.value_or(std::string()), {}, TimePoint::min()};
  for (auto it = records_.lower_bound(lo); it != records_.end(); ++it) {
    const auto& k = it->first;
    if (k.ns != q.ns) break;
    if (q.entity_id && k.entity_id != *q.entity_id) break;
    if (matches(q, k)) out.push_back(it->second);
  }
  std::sort(out.begin(), out.end(), read_order);
  if (q.limit && out.size() > *q.limit) out.resize(*q.limit);
  return out;
}

std::vector<Record> SharedStorage::all() const {
  std::vector<Record> out;
  out.reserve(records_.size());
  for (const auto& [k, r] : records_) out.push_back(r);
  return out;
}

std::size_t SharedStorage::count(Namespace ns) const {
  std::size_t n = 0;
  for (const auto& [k, r] : records_) n += (k.ns == ns);
  return n;
}

const Record* SharedStorage::oldest(Namespace ns) const {
  const Record* best = nullptr;
  for (const auto& [k, r] : records_) {
    if (k.ns != ns) continue;
    if (!best || k.observed_at < best->key.observed_at) best = &r;
  }
  return best;
}

std::uint64_t SharedStorage::last_revision(const RecordKey& key) const {
  if (auto r = find(key)) return r->revision;
  auto it = retired_.find(key);
  return it == retired_.end() ? 0 : it->second;
}

Record SharedStorage::apply_journal_line(const json& line) {
  if (!line.is_object() || !line.contains("key") || !line.contains("revision")) {
    fail(ErrorCode::IoError, "journal line lacks key or revision");
  }
  Record r;
  r.key = record_key_from_json(line["key"]);
  r.body = line.value("body", json());
  if (!line["revision"].is_number_unsigned()) fail(ErrorCode::IoError, "journal revision must be unsigned");
  r.revision = line["revision"].get<std::uint64_t>();
  r.committed_at = time_field(line, "committed_at");
  if (r.body.is_null()) {
    records_.erase(r.key);
    retired_[r.key] = r.revision;
  } else {
    records_[r.key] = r;
    retired_.erase(r.key);
  }
  return r;
}

void SharedStorage::flush() {
  if (journal_.is_open()) journal_.flush();
}

void SharedStorage::journal(const RecordKey& key, const json& body, std::uint64_t revision,
                            TimePoint committed_at) {
  if (!journal_.is_open()) return;
  json line{{"key", to_json(key)},
            {"body", body},
            {"revision", revision},
            {"committed_at", format_rfc3339(committed_at)}};
  journal_ << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  if (!journal_) fail(ErrorCode::IoError, "journal write failed");
}

// ---------------------------------------------------------------------------
// Subscription

std::optional<Record> Subscription::try_pop() {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  Record r = std::move(queue_.front());
  queue_.pop_front();
  return r;
}

std::optional<Record> Subscription::wait_pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return !queue_.empty(); })) return std::nullopt;
  Record r = std::move(queue_.front());
  queue_.pop_front();
  return r;
}

std::vector<Record> Subscription::drain() {
  std::lock_guard lock(mu_);
  std::vector<Record> out(std::make_move_iterator(queue_.begin()),
                          std::make_move_iterator(queue_.end()));
  queue_.clear();
  return out;
}

std::size_t Subscription::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

bool Subscription::wants(const RecordKey& key) const noexcept {
  return key.ns == ns_ && glob_match(pattern_, key.entity_id);
}

void Subscription::push(const Record& r) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back(r);
  }
  cv_.notify_all();
}

// ---------------------------------------------------------------------------
// StorageManager

StorageManager::StorageManager(const LogicalClock* clock, StorageOptions options)
    : clock_(clock), options_(std::move(options)) {
  if (options_.journal) storage_ = SharedStorage(*options_.journal);
}

std::uint64_t StorageManager::create(const RecordKey& key, json body) {
  if (body.is_null()) fail(ErrorCode::InvalidArgument, "record body must not be null");
  std::unique_lock lock(mu_);
  if (storage_.find(key)) {
    fail(ErrorCode::DuplicateKey, std::string(to_string(key.ns)) + "/" + key.entity_id + "/" +
                                      key.name + "@" + format_rfc3339(key.observed_at));
  }
  Record r{key, std::move(body), storage_.last_revision(key) + 1, now(), ++seq_};
  storage_.put(r);
  publish(r);
  enforce_cap(key.ns);
  return r.revision;
}

std::vector<Record> StorageManager::read(const Query& q) const {
  validate(q);
  std::shared_lock lock(mu_);
  return storage_.scan(q);
}

std::optional<Record> StorageManager::get(const RecordKey& key) const {
  std::shared_lock lock(mu_);
  if (auto r = storage_.find(key)) return *r;
  return std::nullopt;
}

std::uint64_t StorageManager::update(const RecordKey& key, json body) {
  if (body.is_null()) fail(ErrorCode::InvalidArgument, "record body must not be null");
  std::unique_lock lock(mu_);
  const Record* cur = storage_.find(key);
  if (!cur) fail(ErrorCode::NotFound, key.entity_id + "/" + key.name);
  Record r{key, std::move(body), cur->revision + 1, now(), ++seq_};
  storage_.put(r);
  publish(r);
  return r.revision;
}

void StorageManager::remove(const RecordKey& key) {
  std::unique_lock lock(mu_);
  const Record* cur = storage_.find(key);
  if (!cur) fail(ErrorCode::NotFound, key.entity_id + "/" + key.name);
  Record tomb{key, nullptr, cur->revision + 1, now(), ++seq_};
  storage_.erase(key, tomb.revision, tomb.committed_at);
  publish(tomb);
}

std::size_t StorageManager::replay(const std::filesystem::path& journal) {
  std::ifstream in(journal);
  if (!in) fail(ErrorCode::IoError, "cannot read journal " + journal.string());
  std::unique_lock lock(mu_);
  std::size_t applied = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::IoError, "journal line " + std::to_string(lineno) + " is not JSON");
    Record r = storage_.apply_journal_line(j);
    r.commit_seq = ++seq_;
    publish(r);
    ++applied;
  }
  return applied;
}

std::shared_ptr<Subscription> StorageManager::subscribe(Namespace ns, std::string entity_pattern) {
  auto sub = std::make_shared<Subscription>(ns, std::move(entity_pattern));
  std::lock_guard lock(sub_mu_);
  subscribers_.push_back(sub);
  return sub;
}

std::vector<Record> StorageManager::dump(std::optional<Namespace> ns) const {
  std::shared_lock lock(mu_);
  std::vector<Record> out;
  for (auto& r : storage_.all()) {
    if (!ns || r.key.ns == *ns) out.push_back(std::move(r));
  }
  return out;
}

std::size_t StorageManager::size() const {
  std::shared_lock lock(mu_);
  return storage_.size();
}

std::uint64_t StorageManager::commit_seq() const {
  std::shared_lock lock(mu_);
  return seq_;
}

void StorageManager::flush() {
  std::unique_lock lock(mu_);
  storage_.flush();
}

// Called with mu_ held exclusively, so delivery order is commit order.
void StorageManager::publish(const Record& r) {
  std::lock_guard lock(sub_mu_);
  auto it = subscribers_.begin();
  while (it != subscribers_.end()) {
    if (auto sub = it->lock()) {
      if (sub->wants(r.key)) sub->push(r);
      ++it;
    } else {
      it = subscribers_.erase(it);
    }
  }
}

void StorageManager::enforce_cap(Namespace ns) {
  auto cap = options_.caps.find(ns);
  if (cap == options_.caps.end() || cap->second == 0) return;
  while (storage_.count(ns) > cap->second) {
    const Record* victim = storage_.oldest(ns);
    if (!victim) break;
    Record tomb{victim->key, nullptr, victim->revision + 1, now(), ++seq_};
    storage_.erase(tomb.key, tomb.revision, tomb.committed_at);
    publish(tomb);
  }
}

}  // namespace twinarch
