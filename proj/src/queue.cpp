#include "qsize/queue.hpp"

#include "qsize/errors.hpp"

namespace qsize {

nlohmann::json to_json(const QueueSpec& q) {
  nlohmann::json j{{"id", q.id}, {"arrival", to_json(q.arrival)}, {"patience", to_json(q.patience)}};
  if (!q.labels.empty()) j["labels"] = q.labels;
  return j;
}

QueueSpec queue_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError(0, "queues", "each queue must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "id" && k != "arrival" && k != "patience" && k != "labels" && k != "mu")
      throw SchemaError(0, k, "unknown key");
  }
  if (!j.contains("id") || !j.at("id").is_string()) throw SchemaError(0, "id", "queue needs a string id");
  if (!j.contains("arrival")) throw SchemaError(0, "arrival", "missing required field");
  if (!j.contains("patience")) throw SchemaError(0, "patience", "missing required field");
  std::map<std::string, std::string> labels;
  if (j.contains("labels")) {
    const auto& l = j.at("labels");
    if (!l.is_object()) throw SchemaError(0, "labels", "labels must be an object of strings");
    for (auto it = l.begin(); it != l.end(); ++it) {
      if (!it.value().is_string()) throw SchemaError(0, it.key(), "label values must be strings");
      labels[it.key()] = it.value().get<std::string>();
    }
  }
  return QueueSpec{j.at("id").get<std::string>(), arrival_from_json(j.at("arrival")),
                   patience_from_json(j.at("patience")), std::move(labels)};
}

}  // namespace qsize
