#pragma once

// A Director that records everything delivered to it.

#include <mutex>
#include <string>
#include <vector>

#include "iccs/supervisory/director.hpp"

namespace iccs::testing {

class Collector : public supervisory::Director {
 public:
  explicit Collector(std::string name)
      : Director(std::move(name), kernel::Scope::kDistributed, "collector") {}

  struct RecordDelivery {
    std::string publisher;
    std::string mapper;
    std::uint64_t subscription;
    supervisory::Record record;
  };
  struct ReportDelivery {
    std::string publisher;
    std::uint64_t monitor;
    std::uint64_t seq;
    statusmon::StatusReport report;
  };

  std::vector<RecordDelivery> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }
  std::vector<ReportDelivery> reports() const {
    std::lock_guard lock(mu_);
    return reports_;
  }
  std::vector<ReportDelivery> reports_for(std::uint64_t monitor) const {
    std::lock_guard lock(mu_);
    std::vector<ReportDelivery> out;
    for (const auto& r : reports_) {
      if (r.monitor == monitor) out.push_back(r);
    }
    return out;
  }
  std::vector<RecordDelivery> records_for(std::uint64_t subscription) const {
    std::lock_guard lock(mu_);
    std::vector<RecordDelivery> out;
    for (const auto& r : records_) {
      if (r.subscription == subscription) out.push_back(r);
    }
    return out;
  }

 protected:
  void on_record(const std::string& publisher, const std::string& mapper,
                 std::uint64_t subscription, const supervisory::Record& record) override {
    std::lock_guard lock(mu_);
    records_.push_back({publisher, mapper, subscription, record});
  }
  void on_report(const std::string& publisher, std::uint64_t monitor, std::uint64_t seq,
                 const statusmon::StatusReport& report) override {
    std::lock_guard lock(mu_);
    reports_.push_back({publisher, monitor, seq, report});
  }

 private:
  mutable std::mutex mu_;
  std::vector<RecordDelivery> records_;
  std::vector<ReportDelivery> reports_;
};

}  // namespace iccs::testing
