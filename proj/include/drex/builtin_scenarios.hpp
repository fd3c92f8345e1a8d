// Built-in reproduction scenarios. scenarios/*.toml in the repository carry
// the same text.
#pragma once

#include <optional>
#include <string_view>

namespace drex::builtin {

inline constexpr std::string_view kFig1Pe = R"(# Persistently exciting regressor, DREM with three LTI filters.
name = "fig1_pe"

[regressor]
kind = "sinusoidal"
amplitudes = [5.0, 8.0]
frequencies = [1.0, 1.0]
phases = [0.0, 1.5707963267948966]

[parameters]
theta = [-1.0, 2.0]

[elre]
family = "lti"
lambdas = [0.2, 0.3, 0.4]

[[estimators]]
kind = "drem"
gains = [2.0, 2.0]

[[estimators]]
kind = "gradient"
gains = 2.0

[grid]
t0 = 0.0
t_end = 40.0
dt = 0.001
method = "rk4"

[analyses]
pe_window = 6.283185307179586
ie_window = [0.0, 6.283185307179586]
generalized_pe = true

[output]
dir = "out"
stem = "fig1_pe"
)";

inline constexpr std::string_view kFig3Ie = R"(# Interval excitation: the regressor vanishes from t = 5 on.
name = "fig3_ie"

[regressor]
kind = "sinusoidal"
amplitudes = [5.0, 8.0]
frequencies = [1.0, 1.0]
phases = [0.0, 1.5707963267948966]
zero_after = 5.0

[parameters]
theta = [-1.0, 2.0]

[elre]
family = "lti"
lambdas = [0.2, 0.3, 0.4]

[[estimators]]
kind = "drem"
gains = [0.2, 0.2]

[grid]
t0 = 0.0
t_end = 40.0
dt = 0.001
method = "rk4"

[analyses]
pe_window = 6.283185307179586
ie_window = [0.0, 5.0]
generalized_pe = true

[output]
dir = "out"
stem = "fig3_ie"
)";

inline constexpr std::string_view kFig5Ie = R"(# Interval excitation with the larger adaptation gain.
name = "fig5_ie"

[regressor]
kind = "sinusoidal"
amplitudes = [5.0, 8.0]
frequencies = [1.0, 1.0]
phases = [0.0, 1.5707963267948966]
zero_after = 5.0

[parameters]
theta = [-1.0, 2.0]

[elre]
family = "lti"
lambdas = [0.2, 0.3, 0.4]

[[estimators]]
kind = "drem"
gains = [0.35, 0.35]

[grid]
t0 = 0.0
t_end = 40.0
dt = 0.001
method = "rk4"

[analyses]
pe_window = 6.283185307179586
ie_window = [0.0, 5.0]
generalized_pe = true

[output]
dir = "out"
stem = "fig5_ie"
)";

inline std::optional<std::string_view> scenario_text(std::string_view name) {
  if (name == "fig1_pe") return kFig1Pe;
  if (name == "fig3_ie") return kFig3Ie;
  if (name == "fig5_ie") return kFig5Ie;
  return std::nullopt;
}

inline constexpr std::string_view kNames[] = {"fig1_pe", "fig3_ie", "fig5_ie"};

}  // namespace drex::builtin
