#pragma once

#include <map>
#include <string>

#include "qsize/distributions.hpp"

namespace qsize {

/// One single-server queue: inter-arrival law A, patience law G.
struct QueueSpec {
  std::string id;
  ArrivalDist arrival;
  PatienceDist patience;
  std::map<std::string, std::string> labels;

  double lambda() const { return arrival.intensity(); }
  double y_bar() const { return patience.bound(); }
};

nlohmann::json to_json(const QueueSpec& q);
QueueSpec queue_from_json(const nlohmann::json& j);

}  // namespace qsize
