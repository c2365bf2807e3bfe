// Runs the demo contract over a trace with a toy recovery hook that patches
// low-confidence answers, then prints the session report.

#include <iostream>

#include "abc/abc.hpp"

#ifndef ABC_DATA_DIR
#define ABC_DATA_DIR "data"
#endif

int main(int argc, char** argv) {
  const std::string data = ABC_DATA_DIR;
  const std::string contract_path = argc > 1 ? argv[1] : data + "/contracts/financial_advisor.yaml";
  const std::string trace_path = argc > 2 ? argv[2] : data + "/traces/financial_soft_recovered.json";
  try {
    auto contract = abc::load_contract_file(contract_path);
    auto trace = abc::load_trace_file(trace_path);

    // pretend the re-prompt worked
    abc::RecoveryHook hook = [](const abc::RecoveryRequest& req) -> std::optional<abc::Correction> {
      if (req.constraint.name != "confidence_floor") return std::nullopt;
      abc::Correction fix{req.state, std::nullopt};
      abc::assign_path(fix.state, "model.confidence", 0.81);
      return fix;
    };

    abc::SessionMonitor mon(contract);
    mon.set_hook(hook);
    mon.add_listener([](const abc::MonitorEvent& e) {
      std::cout << "t=" << e.step << " " << abc::to_string(e.kind) << " " << e.payload.dump() << "\n";
    });
    for (std::size_t t = 0; t < trace.states.size(); ++t)
      mon.step(trace.states[t], t < trace.actions.size() ? &trace.actions[t] : nullptr);

    auto rep = mon.report();
    std::cout << "outcome " << abc::to_string(rep.outcome) << ", Theta " << rep.metrics.theta << "\n";
    return 0;
  } catch (const abc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
