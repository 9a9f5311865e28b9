#pragma once

#include <string>
#include <utility>

#include "tnz/container.hpp"
#include "tnz/tnz.h"

struct tnz_tensor {
  tnz::DenseTensor value;
};

struct tnz_container {
  tnz::Container value;
};

struct tnz_buffer {
  std::string bytes;
};

namespace tnz::capi {

void set_last_error(std::string message);
tnz_status status_of(ErrorCode code) noexcept;

/// Runs `fn`, mapping exceptions onto a status and the thread's last error.
template <typename Fn>
tnz_status guarded(Fn&& fn) noexcept {
  try {
    set_last_error("");
    return std::forward<Fn>(fn)();
  } catch (const Error& e) {
    set_last_error(e.what());
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    set_last_error("out of memory");
    return TNZ_ERR_INTERNAL;
  } catch (const std::exception& e) {
    set_last_error(e.what());
    return TNZ_ERR_INTERNAL;
  } catch (...) {
    set_last_error("unknown error");
    return TNZ_ERR_INTERNAL;
  }
}

/// Command variant: *report is NULL unless the command emits one.
template <typename Fn>
tnz_status guarded(tnz_buffer** report, Fn&& fn) noexcept {
  if (report) *report = nullptr;
  return guarded(std::forward<Fn>(fn));
}

inline void emit(tnz_buffer** report, std::string text) {
  if (report) *report = new tnz_buffer{std::move(text)};
}

}  // namespace tnz::capi
