#pragma once

#include <condition_variable>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "iccs/conduit/object_ref.hpp"
#include "iccs/value.hpp"

namespace iccs::registry {

struct NameEntry {
  std::string object;
  conduit::ObjectRef ref;
  Timestamp registered_at = 0;
};

/// Global object name -> current reference. Re-registration replaces.
class NameService {
 public:
  void register_name(const std::string& object, const conduit::ObjectRef& ref);
  conduit::ObjectRef resolve(const std::string& object) const;  // NO_SUCH_OBJECT
  /// Blocks until `object` is registered; TIMEOUT otherwise.
  conduit::ObjectRef wait_for(const std::string& object, Millis timeout) const;
  /// Drops every entry whose ref points into `process`; returns how many.
  std::size_t remove_process(const std::string& process);
  bool remove(const std::string& object);
  std::vector<NameEntry> entries() const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::map<std::string, NameEntry> table_;
};

}  // namespace iccs::registry
