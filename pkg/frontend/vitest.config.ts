import { defineConfig } from "vitest/config";

// the end-to-end file boots the real bridge process, so give hooks and tests
// room to breathe; the unit files finish in milliseconds regardless
export default defineConfig({
  test: {
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
