#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace thea {

enum class ErrorCode {
  // game_core
  AlreadyFinished,
  GameOver,
  StruckGestureShown,
  NoGesturesRemaining,
  InvalidGameConfig,
  IllegalNumber,
  WrongHandCount,
  // control_loop
  InvalidTiming,
  ScriptDeadlock,
  ScriptParse,
  // device_sim
  UnknownChannel,
  Busy,
  KillSwitchEngaged,
  InvalidFidelity,
  // wire_protocol
  PayloadTooLarge,
  InvalidFrame,
  // session_service
  InvalidConfig,
  DevicesNotCalibrated,
  DeviceInUse,
  UnknownSession,
  SessionClosed,
  UnknownDevice,
  LogFormat,
};

constexpr std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::AlreadyFinished: return "AlreadyFinished";
    case ErrorCode::GameOver: return "GameOver";
    case ErrorCode::StruckGestureShown: return "StruckGestureShown";
    case ErrorCode::NoGesturesRemaining: return "NoGesturesRemaining";
    case ErrorCode::InvalidGameConfig: return "InvalidGameConfig";
    case ErrorCode::IllegalNumber: return "IllegalNumber";
    case ErrorCode::WrongHandCount: return "WrongHandCount";
    case ErrorCode::InvalidTiming: return "InvalidTiming";
    case ErrorCode::ScriptDeadlock: return "ScriptDeadlock";
    case ErrorCode::ScriptParse: return "ScriptParse";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::Busy: return "Busy";
    case ErrorCode::KillSwitchEngaged: return "KillSwitchEngaged";
    case ErrorCode::InvalidFidelity: return "InvalidFidelity";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::InvalidFrame: return "InvalidFrame";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DevicesNotCalibrated: return "DevicesNotCalibrated";
    case ErrorCode::DeviceInUse: return "DeviceInUse";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::UnknownDevice: return "UnknownDevice";
    case ErrorCode::LogFormat: return "LogFormat";
  }
  return "Unknown";
}

// Every failure in the library is an Error carrying a stable code, so callers
// (tests, the HTTP layer) can branch on the code rather than the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace thea
