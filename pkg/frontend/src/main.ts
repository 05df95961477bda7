/**
 * Single-page app: login, tutorial home, authoring screen, playback screen.
 * Screens are plain DOM built per navigation; all state round-trips through
 * the documented HTTP routes.
 */

import { ApiClient, TutorialDoc } from "./api.js";
import { CodeEditor } from "./editor.js";
import { renderMarkdown } from "./markdown.js";
import { PanelManager, paneShell } from "./panels.js";
import { SectionPlayer } from "./player.js";
import { PracticePanel, renderExecution } from "./practice.js";
import { MediaRecorderCapture, PerformanceClock, RecordingController } from "./recorder.js";
import { DEFAULT_LAYOUT, PlaybackState } from "./replay.js";
import { BundleResponse, QuizDocument, SectionDocument } from "./wire.js";

const root = () => document.getElementById("app")!;

function el<K extends keyof HTMLElementTagNameMap>(tag: K, attrs: Record<string, string> = {}, text = ""): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function escapeHtml(text: string): string {
  return text.replaceAll("&", "&amp;").replaceAll("<", "&lt;").replaceAll(">", "&gt;");
}

/** Text with highlight spans as <mark> elements, for playback panes. */
export function textWithMarks(text: string, spans: [number, number][]): string {
  if (spans.length === 0) return escapeHtml(text);
  const ordered = [...spans].sort((a, b) => a[0] - b[0]);
  let html = "";
  let cursor = 0;
  for (const [start, end] of ordered) {
    if (start < cursor) continue; // overlapping spans render first-wins
    html += escapeHtml(text.slice(cursor, start));
    html += `<mark>${escapeHtml(text.slice(start, end))}</mark>`;
    cursor = end;
  }
  return html + escapeHtml(text.slice(cursor));
}

// --- login -------------------------------------------------------------------

function loginScreen(api: ApiClient): void {
  const screen = el("div", { class: "screen login" });
  screen.innerHTML = `
    <h1>tutorcast</h1>
    <form class="login-form">
      <input name="email" type="email" placeholder="email" required>
      <input name="password" type="password" placeholder="password" required>
      <label><input name="role" type="checkbox"> I am an author</label>
      <div class="row">
        <button type="submit" data-action="login">Log in</button>
        <button type="button" data-action="register">Register</button>
        <button type="button" data-action="external">Campus login</button>
      </div>
      <p class="error" role="alert"></p>
    </form>
  `;
  const form = screen.querySelector("form")!;
  const error = screen.querySelector<HTMLParagraphElement>(".error")!;
  const submit = async (action: string) => {
    const data = new FormData(form);
    const email = String(data.get("email") ?? "");
    const password = String(data.get("password") ?? "");
    const role = data.get("role") ? ("author" as const) : ("student" as const);
    try {
      if (action === "register") await api.register(email, password, role);
      else if (action === "external") await api.loginExternal(`stub:${email}`, role);
      else await api.login(email, password);
      homeScreen(api);
    } catch (exc) {
      error.textContent = String(exc);
    }
  };
  form.addEventListener("submit", (e) => {
    e.preventDefault();
    void submit("login");
  });
  form.querySelectorAll("button[type=button]").forEach((b) =>
    b.addEventListener("click", () => void submit((b as HTMLButtonElement).dataset.action!)),
  );
  root().replaceChildren(screen);
}

// --- home ----------------------------------------------------------------------

async function homeScreen(api: ApiClient): Promise<void> {
  const screen = el("div", { class: "screen home" });
  screen.appendChild(el("h1", {}, "Tutorials"));
  const list = el("ul", { class: "tutorial-list" });
  screen.appendChild(list);

  const tutorials = await api.listTutorials();
  for (const tutorial of tutorials) {
    const item = el("li");
    item.appendChild(el("span", {}, `${tutorial.title} (${tutorial.language}, ${tutorial.status})`));
    const open = el("button", {}, "Open");
    open.addEventListener("click", () => void tutorialScreen(api, tutorial));
    item.appendChild(open);
    list.appendChild(item);
  }

  const createForm = el("form", { class: "create-form" });
  createForm.innerHTML = `
    <input name="title" placeholder="new tutorial title" required>
    <input name="language" value="python" required>
    <button type="submit">Create</button>
  `;
  createForm.addEventListener("submit", (e) => {
    e.preventDefault();
    const data = new FormData(createForm);
    void api
      .createTutorial(String(data.get("title")), String(data.get("language")))
      .then((t) => tutorialScreen(api, t));
  });
  screen.appendChild(createForm);
  root().replaceChildren(screen);
}

// --- tutorial (sections + authoring entry) -------------------------------------

async function tutorialScreen(api: ApiClient, tutorial: TutorialDoc): Promise<void> {
  const refresh = async () => {
    const all = await api.listTutorials();
    const updated = all.find((t) => t.tutorial_id === tutorial.tutorial_id);
    if (updated) tutorial = updated;
  };
  await refresh();

  const screen = el("div", { class: "screen tutorial" });
  screen.appendChild(el("h1", {}, tutorial.title));
  const sections = el("ol", { class: "section-list" });
  tutorial.section_ids.forEach((sid, i) => {
    const item = el("li");
    item.appendChild(el("span", {}, sid.slice(0, 8)));
    const play = el("button", {}, "Play");
    play.addEventListener("click", () => void playbackScreen(api, tutorial, sid));
    item.appendChild(play);
    if (tutorial.status === "draft") {
      const up = el("button", {}, "Move up");
      up.addEventListener("click", () => {
        if (i === 0) return;
        const order = [...tutorial.section_ids];
        [order[i - 1], order[i]] = [order[i], order[i - 1]];
        void api.resequence(tutorial.tutorial_id, order).then(() => tutorialScreen(api, tutorial));
      });
      const remove = el("button", {}, "Delete");
      remove.addEventListener("click", () =>
        void api.deleteSection(tutorial.tutorial_id, sid).then(() => tutorialScreen(api, tutorial)),
      );
      item.append(up, remove);
    }
    sections.appendChild(item);
  });
  screen.appendChild(sections);

  const actions = el("div", { class: "row" });
  if (tutorial.status === "draft") {
    const record = el("button", {}, "Record new section");
    record.addEventListener("click", () =>
      void authoringScreen(api, tutorial, tutorial.section_ids.length),
    );
    const release = el("button", {}, "Release to students");
    release.addEventListener("click", () =>
      void api.releaseTutorial(tutorial.tutorial_id).then(() => homeScreen(api)),
    );
    actions.append(record, release);
  }
  const back = el("button", {}, "Back");
  back.addEventListener("click", () => void homeScreen(api));
  actions.appendChild(back);
  screen.appendChild(actions);
  root().replaceChildren(screen);
}

// --- authoring -------------------------------------------------------------------

export interface AuthoringDeps {
  audio?: import("./recorder.js").AudioCapture;
  clock?: import("./recorder.js").RecordingClock & { start?(): void };
}

export interface AuthoringHandles {
  controller: RecordingController;
  panels: PanelManager;
  editor: CodeEditor;
}

export async function authoringScreen(
  api: ApiClient,
  tutorial: TutorialDoc,
  slot: number,
  deps: AuthoringDeps = {},
): Promise<AuthoringHandles> {
  const screen = el("div", { class: "screen authoring" });
  const bar = el("div", { class: "toolbar" });
  bar.innerHTML = `
    <button data-action="record">Start recording</button>
    <button data-action="save" disabled>Save section</button>
    <button data-action="discard" disabled>Discard</button>
    <button data-action="highlight">Highlight selection</button>
    <span class="status">idle</span>
  `;
  screen.appendChild(bar);

  const workspace = el("div", { class: "workspace" });
  screen.appendChild(workspace);

  let lastEditSeq: number | null = null;
  const controller = new RecordingController(
    api,
    deps.audio ?? new MediaRecorderCapture(),
    deps.clock ?? new PerformanceClock(),
    {
      onEvent: (event) => {
        if (event.payload.kind === "edit") lastEditSeq = event.seq;
      },
    },
  );

  const panels = new PanelManager(workspace, DEFAULT_LAYOUT, (panes) =>
    controller.capture({ kind: "layout", panes }),
  );

  const notesShell = paneShell("notes", "Notes (markdown)");
  const notesArea = el("textarea", { class: "notes-input", placeholder: "# Notes for this section" });
  notesShell.querySelector(".pane-body")!.appendChild(notesArea);

  const codeShell = paneShell("code", "Code");
  const codeArea = el("textarea", { class: "code-input", spellcheck: "false" });
  codeShell.querySelector(".pane-body")!.appendChild(codeArea);
  const editor = new CodeEditor(
    "code",
    codeArea,
    (edit) => controller.capture(edit),
    (hl) => controller.capture(hl),
  );

  const inputShell = paneShell("input", "Program input");
  const stdinArea = el("textarea", { class: "stdin-input" });
  inputShell.querySelector(".pane-body")!.appendChild(stdinArea);

  const outputShell = paneShell("output", "Output");
  const outputPre = el("pre", { class: "output-view" });
  const runButton = el("button", {}, "Run");
  outputShell.querySelector(".pane-body")!.append(runButton, outputPre);

  for (const [paneId, shell] of [
    ["notes", notesShell],
    ["code", codeShell],
    ["input", inputShell],
    ["output", outputShell],
  ] as const) {
    panels.attach(paneId, shell);
    shell.querySelector(".pane-max")!.addEventListener("click", () => panels.toggleMaximize(paneId));
    shell.querySelector(".pane-body")!.addEventListener("scroll", (e) => {
      const body = e.target as HTMLElement;
      const range = body.scrollHeight - body.clientHeight;
      if (range > 0) {
        controller.capture({ kind: "scroll", paneId, fraction: body.scrollTop / range });
      }
    });
  }

  runButton.addEventListener("click", async () => {
    const result = await api.execute(tutorial.language, editor.text, stdinArea.value);
    outputPre.textContent = renderExecution(result);
    controller.capture({
      kind: "exec",
      codeSnapshotSeq: lastEditSeq,
      stdin: stdinArea.value,
      stdout: result.stdout,
      stderr: result.stderr,
    });
  });

  const status = bar.querySelector<HTMLElement>(".status")!;
  const buttons = {
    record: bar.querySelector<HTMLButtonElement>("[data-action=record]")!,
    save: bar.querySelector<HTMLButtonElement>("[data-action=save]")!,
    discard: bar.querySelector<HTMLButtonElement>("[data-action=discard]")!,
    highlight: bar.querySelector<HTMLButtonElement>("[data-action=highlight]")!,
  };
  buttons.record.addEventListener("click", async () => {
    await controller.start(tutorial.tutorial_id, slot, tutorial.language, notesArea.value);
    status.textContent = "recording";
    buttons.record.disabled = true;
    buttons.save.disabled = false;
    buttons.discard.disabled = false;
  });
  buttons.save.addEventListener("click", async () => {
    const saved = await controller.save();
    status.textContent = `saved ${saved.sectionId.slice(0, 8)} (${saved.durationMs} ms)`;
    void tutorialScreen(api, tutorial);
  });
  buttons.discard.addEventListener("click", async () => {
    await controller.discard();
    status.textContent = "discarded";
    void tutorialScreen(api, tutorial);
  });
  buttons.highlight.addEventListener("click", () => editor.highlightSelection());

  root().replaceChildren(screen);
  return { controller, panels, editor };
}

// --- playback ---------------------------------------------------------------------

function renderQuiz(api: ApiClient, quiz: QuizDocument, container: HTMLElement): void {
  const form = el("form", { class: "quiz" });
  quiz.questions.forEach((q, qi) => {
    const block = el("fieldset");
    block.appendChild(el("legend", {}, q.prompt));
    q.choices.forEach((choice, ci) => {
      const label = el("label");
      const radio = el("input", { type: "radio", name: `q${qi}`, value: String(ci) });
      label.append(radio, document.createTextNode(choice));
      block.appendChild(label);
    });
    form.appendChild(block);
  });
  const submit = el("button", { type: "submit" }, "Grade");
  const verdict = el("div", { class: "quiz-verdict" });
  form.append(submit, verdict);
  form.addEventListener("submit", async (e) => {
    e.preventDefault();
    const answers = quiz.questions.map((_q, qi) => {
      const checked = form.querySelector<HTMLInputElement>(`input[name=q${qi}]:checked`);
      return checked ? Number(checked.value) : 0;
    });
    const grade = await api.gradeQuiz(quiz.section_id, answers);
    verdict.replaceChildren(
      el("p", {}, `Score: ${grade.score}`),
      ...grade.per_question.map((r, i) =>
        el("p", {}, `Q${i + 1}: ${r.correct ? "correct" : "wrong"} (${r.explanation})`),
      ),
    );
  });
  container.replaceChildren(form);
}

export async function playbackScreen(
  api: ApiClient,
  tutorial: TutorialDoc,
  sectionId: string,
): Promise<void> {
  const bundle: BundleResponse = await api.fetchBundle(tutorial.tutorial_id, sectionId);
  const screen = el("div", { class: "screen playback" });

  if (bundle.kind === "quiz" && bundle.quiz) {
    renderQuiz(api, bundle.quiz, screen);
    root().replaceChildren(screen);
    return;
  }

  const doc = bundle.section as SectionDocument;
  const audioBytes = await api.fetchAudio(tutorial.tutorial_id, sectionId);
  const audio = new Audio(URL.createObjectURL(new Blob([audioBytes as BlobPart], { type: "audio/mpeg" })));

  const bar = el("div", { class: "toolbar" });
  bar.innerHTML = `
    <button data-action="play">Play</button>
    <button data-action="pause">Pause</button>
    <input data-action="seek" type="range" min="0" max="${doc.duration_ms}" value="0" step="100">
    <span class="clock">0.0s</span>
    <input data-action="query" placeholder="search this tutorial">
    <button data-action="search">Search</button>
  `;
  screen.appendChild(bar);

  const workspace = el("div", { class: "workspace" });
  screen.appendChild(workspace);
  const panels = new PanelManager(workspace, DEFAULT_LAYOUT);

  const shells: Record<string, HTMLElement> = {};
  for (const [paneId, title] of [
    ["notes", "Notes"],
    ["code", "Code"],
    ["input", "Input"],
    ["output", "Output"],
    ["practice", "Practice"],
  ] as const) {
    const shell = paneShell(paneId, title);
    shells[paneId] = shell;
    panels.attach(paneId, shell);
    shell.querySelector(".pane-max")!.addEventListener("click", () => panels.toggleMaximize(paneId));
  }
  const practiceArea = el("textarea", { class: "code-input", spellcheck: "false" });
  const practiceRun = el("button", {}, "Run");
  const practiceCopy = el("button", {}, "Copy code at playhead");
  const practiceOut = el("pre", { class: "output-view" });
  shells["practice"].querySelector(".pane-body")!.append(practiceCopy, practiceArea, practiceRun, practiceOut);
  const saveLayout = el("button", {}, "Save layout");
  saveLayout.addEventListener("click", () => panels.saveToLocal());
  bar.appendChild(saveLayout);
  panels.loadFromLocal();

  const practiceEditor = {
    setText: (text: string) => {
      practiceArea.value = text;
    },
    get text() {
      return practiceArea.value;
    },
  };
  const practice = new PracticePanel(api, practiceEditor, doc.language);

  const seek = bar.querySelector<HTMLInputElement>("[data-action=seek]")!;
  const clock = bar.querySelector<HTMLElement>(".clock")!;

  const render = (state: PlaybackState): void => {
    // playback panes show replayed text with highlight marks; the notes
    // pane switches to rendered markdown when nothing is highlighted
    const notesSpans = state.highlights.get("notes") ?? [];
    const notesBody = shells["notes"].querySelector<HTMLElement>(".pane-body")!;
    if (notesSpans.length > 0) {
      notesBody.innerHTML = `<pre class="notes-marked">${textWithMarks(doc.notes, notesSpans)}</pre>`;
    } else {
      notesBody.innerHTML = renderMarkdown(doc.notes);
    }
    for (const paneId of ["code", "input", "output"]) {
      const body = shells[paneId].querySelector<HTMLElement>(".pane-body")!;
      let text = "";
      if (paneId === "code") text = state.buffers.get("code")?.text ?? "";
      if (paneId === "input") text = state.io?.stdin ?? "";
      if (paneId === "output") {
        text = (state.io?.stdout ?? "") + (state.io?.stderr ? `\n${state.io.stderr}` : "");
      }
      const spans = state.highlights.get(paneId) ?? [];
      body.innerHTML = `<pre>${textWithMarks(text, spans)}</pre>`;
      const fraction = state.scrolls.get(paneId);
      if (fraction !== undefined) {
        const range = body.scrollHeight - body.clientHeight;
        body.scrollTop = fraction * Math.max(0, range);
      }
    }
    panels.setLayout(state.layout);
    seek.value = String(state.playhead);
    clock.textContent = `${(state.playhead / 1000).toFixed(1)}s`;
  };

  const player = new SectionPlayer(doc, audio, render);
  player.renderNow();

  bar.querySelector("[data-action=play]")!.addEventListener("click", () => void player.play());
  bar.querySelector("[data-action=pause]")!.addEventListener("click", () => player.pause());
  seek.addEventListener("input", () => player.seek(Number(seek.value)));
  practiceCopy.addEventListener("click", () => practice.copyFrom(player.stateAtPlayhead()));
  practiceRun.addEventListener("click", async () => {
    const result = await practice.run(state_ioStdin());
    practiceOut.textContent = renderExecution(result);
    if (result.exit_status !== 0 || result.compile_errors) {
      const help = await practice.helpForLastError();
      if (help && help.resources.length > 0) {
        practiceOut.textContent += `\n\nrelated help:\n${help.resources
          .map((r) => `- ${r.title} (${r.url})`)
          .join("\n")}`;
      }
    }
  });

  const state_ioStdin = (): string => player.stateAtPlayhead().io?.stdin ?? "";

  const query = bar.querySelector<HTMLInputElement>("[data-action=query]")!;
  bar.querySelector("[data-action=search]")!.addEventListener("click", async () => {
    const hits = await api.search(tutorial.tutorial_id, query.value);
    const list = el("ul", { class: "search-hits" });
    for (const hit of hits) {
      const item = el("li", {}, `${hit.artifact_kind} @ ${(hit.at / 1000).toFixed(1)}s: ${hit.snippet}`);
      if (hit.section_id === sectionId && (hit.artifact_kind === "code" || hit.artifact_kind === "transcript")) {
        item.classList.add("seekable");
        item.addEventListener("click", () => player.seek(hit.at));
      }
      list.appendChild(item);
    }
    screen.querySelector(".search-hits")?.remove();
    screen.appendChild(list);
  });

  root().replaceChildren(screen);
}

// --- bootstrap ---------------------------------------------------------------------

export function startApp(baseUrl?: string): void {
  const api = new ApiClient(baseUrl ?? (window as { TUTORCAST_API?: string }).TUTORCAST_API ?? "");
  loginScreen(api);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  startApp();
}
