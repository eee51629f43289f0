#pragma once

#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "iccs/kernel/configurable.hpp"
#include "iccs/statusmon/deadband.hpp"
#include "iccs/supervisory/record.hpp"

namespace iccs::supervisory {

/// Subscriber role. Exposes `update`, which carries either a mapper record
/// `{publisher, mapper, subscription, record}` or a status report
/// `{publisher, monitor, seq, report}`. Redelivered or stale sequence numbers
/// are dropped before reaching the handlers.
class Director : public kernel::Configurable {
 public:
  Director(std::string name, kernel::Scope scope, std::string type_tag);

  /// Updates from distinct publishers may arrive concurrently.
  bool reentrant() const override { return true; }

  std::uint64_t duplicates_dropped() const;

 protected:
  virtual void on_record(const std::string& publisher, const std::string& mapper,
                         std::uint64_t subscription, const Record& record) {}
  virtual void on_report(const std::string& publisher, std::uint64_t monitor, std::uint64_t seq,
                         const statusmon::StatusReport& report) {}

 private:
  bool fresh(const std::string& publisher, const std::string& stream, std::uint64_t seq);

  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> last_seen_;
  std::uint64_t duplicates_ = 0;
};

}  // namespace iccs::supervisory
