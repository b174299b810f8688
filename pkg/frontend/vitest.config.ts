import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["test/**/*.test.ts"],
    // Fixture servers bind real ports; keep files sequential so teardown
    // from one file cannot race another file's connections.
    fileParallelism: false,
    testTimeout: 10_000,
  },
});
