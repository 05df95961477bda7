import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globals: true,
    environment: "jsdom",
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // the integration spec drives a real backend process; keep runs serial
    fileParallelism: false,
  },
});
