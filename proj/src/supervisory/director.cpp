#include "iccs/supervisory/director.hpp"

namespace iccs::supervisory {

Director::Director(std::string name, kernel::Scope scope, std::string type_tag)
    : Configurable(std::move(name), scope, std::move(type_tag)) {
  expose("update", [this](const json& a) {
    auto publisher = a.at("publisher").get<std::string>();
    if (a.contains("record")) {
      auto mapper = a.at("mapper").get<std::string>();
      auto subscription = a.value("subscription", std::uint64_t{0});
      auto record = record_from_json(a["record"]);
      if (fresh(publisher, mapper + "#" + std::to_string(subscription), record.seq)) {
        on_record(publisher, mapper, subscription, record);
      }
    } else {
      auto monitor = a.at("monitor").get<std::uint64_t>();
      auto seq = a.at("seq").get<std::uint64_t>();
      auto report = statusmon::status_report_from_json(a.at("report"));
      if (fresh(publisher, "monitor#" + std::to_string(monitor), seq)) {
        on_report(publisher, monitor, seq, report);
      }
    }
    return json(nullptr);
  });
}

bool Director::fresh(const std::string& publisher, const std::string& stream, std::uint64_t seq) {
  std::lock_guard lock(mu_);
  auto key = std::make_pair(publisher, stream);
  auto it = last_seen_.find(key);
  if (it != last_seen_.end() && seq <= it->second) {
    ++duplicates_;
    return false;
  }
  last_seen_[key] = seq;
  return true;
}

std::uint64_t Director::duplicates_dropped() const {
  std::lock_guard lock(mu_);
  return duplicates_;
}

}  // namespace iccs::supervisory
