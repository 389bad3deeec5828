// Spawns the real practice service for end-to-end tests.

import { spawn, type ChildProcess } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdtempSync } from "node:fs";
import { get } from "node:http";
import { tmpdir } from "node:os";
import { join } from "node:path";

const SECRET = "frontend-e2e-secret";

export function participantToken(pid: string): string {
  const digest = createHash("sha256")
    .update(`${SECRET}:participant:${pid}`)
    .digest("hex")
    .slice(0, 32);
  return `${pid}.${digest}`;
}

export function analystToken(): string {
  const digest = createHash("sha256").update(`${SECRET}:analyst:`).digest("hex").slice(0, 32);
  return `analyst.${digest}`;
}

export interface ServiceHandle {
  baseUrl: string;
  dataDir: string;
  stop: () => void;
}

function probeHealth(baseUrl: string): Promise<boolean> {
  // plain node http: happy-dom's fetch logs every refused connection
  return new Promise((resolve) => {
    const request = get(`${baseUrl}/health`, (response) => {
      response.resume();
      resolve(response.statusCode === 200);
    });
    request.on("error", () => resolve(false));
    request.setTimeout(1000, () => {
      request.destroy();
      resolve(false);
    });
  });
}

async function waitForHealth(baseUrl: string, child: ChildProcess): Promise<boolean> {
  for (let attempt = 0; attempt < 100; attempt++) {
    if (child.exitCode !== null) return false;
    if (await probeHealth(baseUrl)) return true;
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  return false;
}

export async function startService(): Promise<ServiceHandle> {
  const dataDir = mkdtempSync(join(tmpdir(), "pianotact-e2e-"));
  let lastError = "";
  for (let attempt = 0; attempt < 5; attempt++) {
    const port = 21000 + Math.floor(Math.random() * 20000);
    const baseUrl = `http://127.0.0.1:${port}`;
    const child = spawn(
      "pianotact",
      ["--data-dir", dataDir, "serve", "--port", String(port)],
      {
        env: { ...process.env, PIANOTACT_TOKEN_SECRET: SECRET },
        stdio: ["ignore", "ignore", "pipe"],
      },
    );
    let stderr = "";
    child.stderr?.on("data", (chunk) => {
      stderr += String(chunk);
    });
    if (await waitForHealth(baseUrl, child)) {
      return {
        baseUrl,
        dataDir,
        stop: () => {
          child.kill("SIGTERM");
        },
      };
    }
    child.kill("SIGKILL");
    lastError = stderr;
  }
  throw new Error(`service never became healthy: ${lastError}`);
}

export async function importSong(
  baseUrl: string,
  songId: string,
  smf: Uint8Array,
): Promise<void> {
  const response = await fetch(`${baseUrl}/songs?id=${songId}`, {
    method: "POST",
    headers: {
      Authorization: `Bearer ${analystToken()}`,
      "Content-Type": "application/octet-stream",
    },
    body: smf,
  });
  if (!response.ok) {
    throw new Error(`song import failed: ${response.status} ${await response.text()}`);
  }
}
