#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "iccs/conduit/client.hpp"
#include "iccs/kernel/context.hpp"
#include "iccs/kernel/serial_worker.hpp"
#include "iccs/supervisory/director.hpp"

namespace iccs::supervisory {

/// A pure projection of LCU private state into record entries.
using Projection = std::function<Entries(const json& state)>;

/// Publisher and subscriber. Private state is reachable only through data
/// mappers; each mapper republishes (seq + 1) whenever its projection of the
/// state changes. Distributed methods: attach_mapper, detach, mappers.
class Lcu : public Director {
 public:
  Lcu(const registry::ObjectSpec& spec, kernel::ProcessContext& context, json initial_state);
  ~Lcu() override;

  void on_shutdown() override;

  struct Attachment {
    std::uint64_t subscription;
    std::uint64_t seq;  // of the snapshot that will be delivered first
  };
  /// NO_SUCH_OBJECT for an unknown mapper. The snapshot is queued before any
  /// later publication.
  Attachment attach_mapper(const std::string& mapper, const conduit::ObjectRef& subscriber,
                           std::optional<conduit::ConnectionPolicy> policy = std::nullopt);
  void detach(std::uint64_t subscription);  // NO_SUCH_OBJECT

  /// Merges `delta` (JSON merge patch) into the state and publishes every
  /// mapper whose projection changed. APP_ERROR when validate() rejects it.
  void evolve(const json& delta);

  std::vector<std::string> mappers() const;
  Record last_published(const std::string& mapper) const;
  std::size_t subscriber_count(const std::string& mapper) const;
  /// Delivery attempts that reached the subscriber.
  std::uint64_t deliveries() const { return deliveries_.load(); }
  /// Waits until every queued delivery has been attempted.
  bool flush(Millis timeout);

 protected:
  void add_mapper(std::string name, Projection projection);
  /// Throw to reject a candidate state.
  virtual void validate(const json& candidate) const {}
  kernel::ProcessContext& context() { return context_; }

 private:
  struct Mapper {
    Projection projection;
    Record last;
  };
  struct Subscription;

  void deliver(const std::shared_ptr<Subscription>& sub, const Record& record);
  void drop_subscriber(std::uint64_t id, const std::string& why);

  kernel::ProcessContext& context_;
  mutable std::mutex mu_;
  json state_;
  std::map<std::string, Mapper> mappers_;
  std::uint64_t next_subscription_ = 1;
  std::map<std::uint64_t, std::shared_ptr<Subscription>> subscriptions_;
  std::vector<std::shared_ptr<Subscription>> retired_;
  std::atomic<std::uint64_t> deliveries_{0};
};

/// Default delivery policy for subscribers that do not supply one.
conduit::ConnectionPolicy default_delivery_policy();

/// Configurable LCU: params.state is the initial private state,
/// params.mappers maps each mapper name to the state keys it projects, and
/// params.readonly lists keys evolve may not touch. Exposes `evolve {delta}`.
class GenericLcu : public Lcu {
 public:
  GenericLcu(const registry::ObjectSpec& spec, kernel::ProcessContext& context);

 protected:
  void validate(const json& candidate) const override;

 private:
  json initial_;
  std::vector<std::string> readonly_;
};

/// Projects `keys` of a flat state object, in that order, skipping absent or
/// non-scalar values.
Entries project_keys(const json& state, const std::vector<std::string>& keys);

}  // namespace iccs::supervisory
