// glibc allocator interposition feeding lngram::memtrack. Linked only into
// executables; sizes come from malloc_usable_size so frees balance exactly.

#include <malloc.h>

#include <cerrno>
#include <cstddef>
#include <cstring>

#include "lngram/memtrack.hpp"

extern "C" {
void* __libc_malloc(std::size_t);
void __libc_free(void*);
void* __libc_calloc(std::size_t, std::size_t);
void* __libc_realloc(void*, std::size_t);
void* __libc_memalign(std::size_t, std::size_t);
}

namespace {

void* note(void* p) {
  if (p) lngram::memtrack::detail::on_alloc(malloc_usable_size(p));
  return p;
}

}  // namespace

extern "C" {

void* malloc(std::size_t size) { return note(__libc_malloc(size)); }

void free(void* p) {
  if (!p) return;
  lngram::memtrack::detail::on_free(malloc_usable_size(p));
  __libc_free(p);
}

void* calloc(std::size_t n, std::size_t size) { return note(__libc_calloc(n, size)); }

void* realloc(void* p, std::size_t size) {
  const std::size_t old = p ? malloc_usable_size(p) : 0;
  void* q = __libc_realloc(p, size);
  if (!q) {
    if (p && size == 0) lngram::memtrack::detail::on_free(old);  // glibc freed p
    return q;
  }
  if (p) lngram::memtrack::detail::on_free(old);
  return note(q);
}

void* memalign(std::size_t alignment, std::size_t size) { return note(__libc_memalign(alignment, size)); }

void* aligned_alloc(std::size_t alignment, std::size_t size) { return note(__libc_memalign(alignment, size)); }

int posix_memalign(void** out, std::size_t alignment, std::size_t size) {
  if (alignment % sizeof(void*) != 0 || (alignment & (alignment - 1)) != 0) return EINVAL;
  void* p = __libc_memalign(alignment, size);
  if (!p && size) return ENOMEM;
  *out = note(p);
  return 0;
}

}  // extern "C"
